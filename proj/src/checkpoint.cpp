#include "entropg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "entropg/models.hpp"

namespace entropg::checkpoint {

namespace {

constexpr const char* kMagic = "entropg-checkpoint v1";

void write_le_double(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double read_le_double(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("checkpoint truncated in parameter data");
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b) bits = (bits << 8) | buf[b];
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

struct Header {
  Meta meta;
  std::vector<std::pair<std::string, std::vector<int>>> params;
  std::streampos data_start;
};

Header read_header(std::istream& in, const std::filesystem::path& path) {
  Header h;
  std::string line;
  if (!std::getline(in, line) || line != kMagic)
    throw std::runtime_error(path.string() + ": not an entropg checkpoint");
  std::size_t declared_params = 0;
  while (std::getline(in, line)) {
    if (line == "end") {
      if (h.params.size() != declared_params)
        throw std::runtime_error(path.string() + ": parameter count mismatch in header");
      h.data_start = in.tellg();
      return h;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "kind") ls >> h.meta.model_kind;
    else if (key == "dims") ls >> h.meta.dims;
    else if (key == "arity") ls >> h.meta.arity;
    else if (key == "state_dim") ls >> h.meta.state_dim;
    else if (key == "hidden") ls >> h.meta.hidden;
    else if (key == "layers") ls >> h.meta.layers;
    else if (key == "seed") ls >> h.meta.seed;
    else if (key == "params") ls >> declared_params;
    else if (key == "param") {
      std::string name;
      int ndims = 0;
      ls >> name >> ndims;
      std::vector<int> shape(static_cast<std::size_t>(ndims));
      for (int& e : shape) ls >> e;
      if (!ls) throw std::runtime_error(path.string() + ": malformed param line");
      h.params.emplace_back(std::move(name), std::move(shape));
    } else {
      throw std::runtime_error(path.string() + ": unknown header key '" + key + "'");
    }
  }
  throw std::runtime_error(path.string() + ": header has no end marker");
}

}  // namespace

void save(const std::filesystem::path& path, policy::PolicyModel& model, const Meta& meta) {
  std::ostringstream header;
  header << kMagic << "\n"
         << "kind " << meta.model_kind << "\n"
         << "dims " << meta.dims << "\n"
         << "arity " << meta.arity << "\n"
         << "state_dim " << meta.state_dim << "\n"
         << "hidden " << meta.hidden << "\n"
         << "layers " << meta.layers << "\n"
         << "seed " << meta.seed << "\n";
  auto params = model.parameters();
  header << "params " << params.size() << "\n";
  for (auto* p : params) {
    header << "param " << p->name() << " " << p->shape().size();
    for (int e : p->shape()) header << " " << e;
    header << "\n";
  }
  header << "end\n";

  std::string blob = header.str();
  for (auto* p : params)
    for (double v : p->values()) write_le_double(blob, v);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
  std::filesystem::rename(tmp, path);
}

Meta peek(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_header(in, path).meta;
}

std::unique_ptr<policy::PolicyModel> load(const std::filesystem::path& path, Meta* meta_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  Header h = read_header(in, path);

  auto model = policy::make_policy(h.meta.model_kind,
                                   policy::ActionSpace(h.meta.dims, h.meta.arity),
                                   h.meta.state_dim, h.meta.hidden, h.meta.layers,
                                   h.meta.seed);
  auto params = model->parameters();
  if (params.size() != h.params.size())
    throw std::runtime_error(path.string() + ": parameter list does not match model kind");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->name() != h.params[i].first || params[i]->shape() != h.params[i].second)
      throw std::runtime_error(path.string() + ": parameter " + h.params[i].first +
                               " does not match the reconstructed model");
    for (double& v : params[i]->values()) v = read_le_double(in);
  }
  if (meta_out) *meta_out = h.meta;
  return model;
}

}  // namespace entropg::checkpoint
