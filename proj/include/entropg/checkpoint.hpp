#ifndef ENTROPG_CHECKPOINT_HPP
#define ENTROPG_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "entropg/policy.hpp"

namespace entropg::checkpoint {

struct Meta {
  std::string model_kind;
  int dims = 0;
  int arity = 0;
  int state_dim = 0;
  int hidden = 0;
  int layers = 1;
  std::uint64_t seed = 0;
};

/// Plain-text header (model kind, action space, hidden sizes, seed, one line
/// per parameter with its shape) followed by the flat parameter arrays as
/// little-endian 64-bit floats in header order.
void save(const std::filesystem::path& path, policy::PolicyModel& model, const Meta& meta);

/// Header only; cheap shape validation before a full load.
Meta peek(const std::filesystem::path& path);

/// Reconstructs the model named in the header and fills its parameters.
std::unique_ptr<policy::PolicyModel> load(const std::filesystem::path& path, Meta* meta_out = nullptr);

}  // namespace entropg::checkpoint

#endif
