#include "embercall/models/serialize.hpp"

#include <bit>
#include <cstring>

#include "embercall/models/cnb.hpp"
#include "embercall/models/linear.hpp"
#include "embercall/models/mlp.hpp"
#include "embercall/models/ovr.hpp"
#include "embercall/models/stack.hpp"

namespace embercall::models {

std::unique_ptr<Classifier> restore_classifier(const Json& d, std::span<const double>& params) {
  const auto kind = d.at("kind").get<std::string>();
  if (kind == "logreg") return std::make_unique<LinearModel>(LinearModel::restore(d, params));
  if (kind == "cnb") return std::make_unique<CnbModel>(CnbModel::restore(d, params));
  if (kind == "mlp") return std::make_unique<MlpModel>(MlpModel::restore(d, params));
  if (kind == "ovr") return std::make_unique<OvrModel>(OvrModel::restore(d, params));
  if (kind == "stack") return std::make_unique<StackedModel>(StackedModel::restore(d, params));
  throw ValidationError("unknown model kind '" + kind + "'");
}

std::string encode_params(std::span<const double> values) {
  std::string out(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int k = 0; k < 8; ++k) out[i * 8 + static_cast<std::size_t>(k)] = static_cast<char>((bits >> (8 * k)) & 0xff);
  }
  return out;
}

std::vector<double> decode_params(std::string_view bytes) {
  if (bytes.size() % 8 != 0) throw ValidationError("model file: parameter block is not a whole number of float64");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(k)])) << (8 * k);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

void save_model(const fs::path& path, const ModelFile& file) {
  if (!file.model) throw ValidationError("save_model: no model");
  if (file.classes.size() != static_cast<std::size_t>(file.model->num_classes()))
    throw ValidationError("save_model: " + std::to_string(file.classes.size()) + " class names for a " +
                          std::to_string(file.model->num_classes()) + "-class model");
  std::vector<double> params;
  file.model->append_params(params);
  const Json header = {{"format", kModelFormat},
                       {"version", kModelFormatVersion},
                       {"kind", file.model->kind()},
                       {"variant", file.variant},
                       {"input_dim", file.model->input_dim()},
                       {"classes", file.classes},
                       {"manifest_sha256", file.manifest_sha256},
                       {"training", file.training},
                       {"model", file.model->describe()},
                       {"params", params.size()},
                       {"encoding", "float64-le"}};
  atomic_write_bytes(path, header.dump() + "\n" + encode_params(params));
}

ModelFile load_model(const fs::path& path) {
  const std::string bytes = read_file(path);
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw ValidationError("model file " + path.string() + ": missing header line");
  Json header;
  try {
    header = Json::parse(bytes.substr(0, nl));
  } catch (const Json::exception& e) {
    throw ValidationError("model file " + path.string() + ": bad header: " + e.what());
  }
  if (header.value("format", "") != kModelFormat || header.value("version", 0) != kModelFormatVersion)
    throw ValidationError("model file " + path.string() + ": not an embercall model (format/version)");
  const std::vector<double> params = decode_params(std::string_view(bytes).substr(nl + 1));
  if (params.size() != header.at("params").get<std::size_t>())
    throw ValidationError("model file " + path.string() + ": parameter count mismatch");

  ModelFile file;
  file.variant = header.at("variant").get<std::string>();
  file.classes = header.at("classes").get<std::vector<std::string>>();
  file.manifest_sha256 = header.value("manifest_sha256", "");
  file.training = header.value("training", Json::object());
  std::span<const double> cursor(params);
  try {
    file.model = restore_classifier(header.at("model"), cursor);
  } catch (const Json::exception& e) {
    throw ValidationError("model file " + path.string() + ": bad model description: " + e.what());
  }
  if (!cursor.empty()) throw ValidationError("model file " + path.string() + ": trailing parameters");
  return file;
}

}  // namespace embercall::models
