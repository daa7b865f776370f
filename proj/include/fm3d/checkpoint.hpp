#pragma once

// "FM3D" checkpoint container, little-endian throughout:
//
//   magic      4 bytes  "FM3D"
//   version    u32      = 1
//   precision  u8       4 (single) or 8 (double): bytes per stored scalar
//   grad_mode  u8       0 sum, 1 average
//   variant    u8       0 filter map, 1 baseline
//   reserved   u8       0
//   epochs     u64      completed epochs
//   net        str      network description text
//   rng        str      generator state
//   tensors    u32 count, then per tensor:
//                str name, u32 rank, u64 dims[rank], scalars[prod(dims)]
//
// str is a u32 byte length followed by the bytes. Parameter tensors use the
// model's names; momentum buffers are stored as "<name>.momentum".

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fm3d/filter_map.hpp"
#include "fm3d/model.hpp"
#include "fm3d/network.hpp"

namespace fm3d {

enum class Precision { Single, Double };

std::string_view to_string(Precision p) noexcept;
Precision parse_precision(std::string_view text);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape dims;
  std::vector<double> values;  // widened from float for single precision

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  Precision precision = Precision::Double;
  GradMode grad_mode = GradMode::Average;
  Variant variant = Variant::FilterMap;
  std::uint64_t epochs_completed = 0;
  std::string net_description;
  std::string rng_state;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// Throws BadMagic, VersionMismatch or TruncatedFile.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Parameters of `model` (and momentum buffers, parallel to model.params()).
template <typename T>
std::vector<NamedTensor> capture_tensors(Model<T>& model, const std::vector<Tensor<T>>& momentum);

// Copies parameters (and momentum when `momentum` is non-null) back into a
// model built from the same description. Throws DimMismatch naming the layer.
template <typename T>
void restore_tensors(Model<T>& model, const Checkpoint& ckpt, std::vector<Tensor<T>>* momentum);

}  // namespace fm3d
