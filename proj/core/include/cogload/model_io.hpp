#pragma once

#include "cogload/model.hpp"
#include "cogload/windowing.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace cogload::model {

/// Everything inference needs: weights plus the normalization fitted at
/// training time.
struct ModelBundle {
  ModelParams params;
  windowing::Normalizer normalizer;
  std::uint64_t seed = 0;
};

inline constexpr char kModelMagic[8] = {'C', 'L', 'M', 'O', 'D', 'E', 'L', '1'};
inline constexpr int kModelFormatVersion = 1;

/// FNV-1a 64-bit hash, used as the parameter-block checksum.
std::uint64_t fnv1a64(const void* data, std::size_t size);

/// Layout: 8-byte magic, uint32 little-endian header length, JSON header,
/// then float32 little-endian parameter blocks in declared order.
void save_model(std::ostream& out, const ModelBundle& bundle);
void save_model(const std::string& path, const ModelBundle& bundle);

ModelBundle load_model(std::istream& in);
ModelBundle load_model(const std::string& path);

}  // namespace cogload::model
