#pragma once

#include <memory>
#include <string>
#include <vector>

#include "embercall/models/classifier.hpp"

namespace embercall::models {

inline constexpr const char* kModelFormat = "embercall.model";
inline constexpr int kModelFormatVersion = 1;

/// A fitted classifier plus what is needed to use it: the feature variant,
/// class names in output order, and the dataset it was trained on.
struct ModelFile {
  std::string variant;
  std::vector<std::string> classes;
  std::string manifest_sha256;
  Json training = Json::object();  // free-form training settings
  std::shared_ptr<const Classifier> model;
};

/// One JSON header line, then the parameters as little-endian float64.
void save_model(const fs::path& path, const ModelFile& file);
ModelFile load_model(const fs::path& path);

std::string encode_params(std::span<const double> values);
std::vector<double> decode_params(std::string_view bytes);

}  // namespace embercall::models
