#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facetts/diffcore/layers.hpp"
#include "facetts/diffcore/tensor.hpp"

namespace facetts::dc {

struct ContainerEntry {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

/// Flat binary container used for checkpoints and mel dumps:
///
///   bytes 0..7   magic "FTTSDC01"
///   bytes 8..15  header length in bytes, little-endian u64
///   header       UTF-8 JSON {"meta": {...}, "tensors": [{"name", "shape", "dtype": "float64"}...]}
///   payload      raw little-endian float64 values of each tensor, in header order
struct Container {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<ContainerEntry> entries;

  const ContainerEntry* find(const std::string& name) const;
  const ContainerEntry& at(const std::string& name) const;
  void add(std::string name, Shape shape, std::vector<double> data);
};

void write_container(const std::filesystem::path& path, const Container& container);
Container read_container(const std::filesystem::path& path);

std::vector<unsigned char> encode_container(const Container& container);
Container decode_container(const std::vector<unsigned char>& bytes);

/// Appends every parameter as an entry under its name.
void store_params(Container& out, const ParamList& params);
/// Copies stored values into `params` in place. Throws ParseError on a missing entry or shape mismatch.
void restore_params(const Container& in, const ParamList& params);

}  // namespace facetts::dc
