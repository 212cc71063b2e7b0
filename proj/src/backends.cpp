#include "embercall/backends.hpp"

#include <Eigen/Dense>
#include <complex>
#include <cstdlib>
#include <fstream>
#include <unordered_set>

#include "fft.hpp"
#include "nlohmann/json.hpp"

namespace embercall {

using Json = nlohmann::json;

std::string source_name(std::size_t index) { return "source" + std::to_string(index); }

std::size_t SeparationResult::source_index_of(std::string_view name) const {
  for (std::size_t i = 0; i < sources.size(); ++i)
    if (name == source_name(i)) return i;
  throw ValidationError("unknown source channel '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Synthetic separator

std::vector<double> SyntheticSeparator::band_edges(int num_sources, int rate) {
  std::vector<double> edges;
  if (num_sources == 4) {
    edges = {0.0, 2000.0, 4000.0, 8000.0};
  } else if (num_sources == 8) {
    edges = {0.0, 1000.0, 2000.0, 3000.0, 4000.0, 6000.0, 8000.0, 12000.0};
  } else {
    throw ValidationError("separate: num_sources must be 4 or 8, got " + std::to_string(num_sources));
  }
  const double scale = static_cast<double>(rate) / kSeparatorRate;
  for (double& e : edges) e *= scale;
  edges.push_back(rate / 2.0);
  return edges;
}

SeparationResult SyntheticSeparator::separate(const AudioClip& clip, int num_sources) const {
  const auto edges = band_edges(num_sources, clip.sample_rate);
  if (clip.sample_rate != sample_rate())
    throw ValidationError("separate: expected " + std::to_string(sample_rate()) + " Hz input, got " +
                          std::to_string(clip.sample_rate));
  clip.validate();
  const std::size_t n = clip.samples.size();
  SeparationResult result;
  result.sources.resize(static_cast<std::size_t>(num_sources));
  for (int k = 0; k < num_sources; ++k) {
    result.sources[k].sample_rate = clip.sample_rate;
    result.sources[k].stem = clip.stem + "_" + source_name(static_cast<std::size_t>(k));
    result.sources[k].samples.assign(n, 0.0f);
  }

  detail::RealFft fft(n);
  std::vector<double> time(clip.samples.begin(), clip.samples.end());
  std::vector<std::complex<double>> spectrum(fft.bins());
  std::vector<std::complex<double>> masked(fft.bins());
  fft.forward(time, spectrum);

  const double bin_hz = static_cast<double>(clip.sample_rate) / static_cast<double>(n);
  std::vector<double> residual(clip.samples.begin(), clip.samples.end());
  for (int k = 0; k + 1 < num_sources; ++k) {
    for (std::size_t b = 0; b < spectrum.size(); ++b) {
      const double f = static_cast<double>(b) * bin_hz;
      masked[b] = (f >= edges[k] && f < edges[k + 1]) ? spectrum[b] : std::complex<double>{};
    }
    fft.inverse(masked, time);
    auto& out = result.sources[k].samples;
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = static_cast<float>(time[i] / static_cast<double>(n));
      residual[i] -= out[i];
    }
  }
  // Last band as the residual of the float sources keeps the mixture
  // consistent to float rounding.
  auto& last = result.sources.back().samples;
  for (std::size_t i = 0; i < n; ++i) last[i] = static_cast<float>(residual[i]);
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic embedder

namespace {
constexpr int kBinsPerBand = 7;
constexpr double kFrameHz = 50.0;  // bin spacing of a 960-sample frame at 48 kHz
}  // namespace

double SyntheticEmbedder::band_low_hz(int k) { return kFrameHz * (1 + kBinsPerBand * k) - kFrameHz / 2; }
double SyntheticEmbedder::band_width_hz() { return kFrameHz * kBinsPerBand; }

SyntheticEmbedder::SyntheticEmbedder() : SyntheticEmbedder(Options{}) {}

SyntheticEmbedder::SyntheticEmbedder(Options options) : options_(options) {
  if (options_.embed_dim < 1 || options_.class_dim < 1) throw ValidationError("SyntheticEmbedder: bad dimensions");
  const auto d = static_cast<std::size_t>(options_.embed_dim);
  const auto c = static_cast<std::size_t>(options_.class_dim);
  Rng rng(options_.seed);
  projection_.resize(d * kBands);
  for (double& v : projection_) v = rng.normal();
  classifier_.resize(c * d);
  const double random_scale = 0.5 / std::sqrt(static_cast<double>(d));
  for (std::size_t cls = 0; cls < c; ++cls) {
    for (std::size_t j = 0; j < d; ++j) {
      const double noise = rng.normal();
      classifier_[cls * d + j] = cls < static_cast<std::size_t>(kBands)
                                     ? options_.logit_scale / static_cast<double>(d) * projection_[j * kBands + cls]
                                     : random_scale * noise;
    }
  }
  bias_.resize(c);
  for (double& b : bias_) b = 0.25 * rng.normal();
}

std::vector<EmbedderOutput> SyntheticEmbedder::embed_windows(const AudioClip& clip) const {
  if (clip.sample_rate != sample_rate())
    throw ValidationError("embed: expected " + std::to_string(sample_rate()) + " Hz input, got " +
                          std::to_string(clip.sample_rate));
  const std::size_t frame = static_cast<std::size_t>(clip.sample_rate) / kFramesPerSecond;
  const std::size_t num_windows = window_count(clip.samples.size(), clip.sample_rate, kWindowSeconds, kHopSeconds);
  if (num_windows == 0) throw ValidationError("embed: clip '" + clip.stem + "' is shorter than 3 s");
  clip.validate();

  // Per-frame band magnitudes, shared by the overlapping windows.
  const std::size_t frames = (num_windows - 1) * kFramesPerSecond * kHopSeconds + kFramesPerSecond * kWindowSeconds;
  detail::RealFft fft(frame);
  std::vector<double> hann(frame);
  for (std::size_t i = 0; i < frame; ++i) hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / static_cast<double>(frame));
  std::vector<double> buf(frame);
  std::vector<std::complex<double>> spec(fft.bins());
  Eigen::MatrixXd bands(kBands, static_cast<Eigen::Index>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < frame; ++i) buf[i] = hann[i] * clip.samples[f * frame + i];
    fft.forward(buf, spec);
    for (int k = 0; k < kBands; ++k) {
      double acc = 0.0;
      for (int b = 0; b < kBinsPerBand; ++b) acc += std::abs(spec[1 + kBinsPerBand * k + b]);
      bands(k, static_cast<Eigen::Index>(f)) = acc / (kBinsPerBand * static_cast<double>(frame));
    }
  }

  const auto d = static_cast<Eigen::Index>(options_.embed_dim);
  const auto c = static_cast<Eigen::Index>(options_.class_dim);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> projection(
      projection_.data(), d, kBands);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> classifier(
      classifier_.data(), c, d);
  Eigen::Map<const Eigen::VectorXd> bias(bias_.data(), c);

  // All windows at once: profiles (64 x W) -> embeddings (d x W) -> logits.
  const auto w = static_cast<Eigen::Index>(num_windows);
  Eigen::MatrixXd profiles(kBands, w);
  const int span = kFramesPerSecond * kWindowSeconds;
  for (Eigen::Index t = 0; t < w; ++t) {
    const Eigen::VectorXd mean = bands.middleCols(t * kFramesPerSecond * kHopSeconds, span).rowwise().mean();
    profiles.col(t) = mean / (mean.sum() + options_.profile_floor);
  }
  const Eigen::MatrixXd embeddings = projection * profiles;
  const Eigen::MatrixXd logits = (classifier * embeddings).colwise() + bias;

  std::vector<EmbedderOutput> out(num_windows);
  for (Eigen::Index t = 0; t < w; ++t) {
    auto& o = out[static_cast<std::size_t>(t)];
    o.start_time = static_cast<int>(t) * kHopSeconds;
    o.embedding.resize(static_cast<std::size_t>(d));
    o.logits.resize(static_cast<std::size_t>(c));
    for (Eigen::Index j = 0; j < d; ++j) o.embedding[static_cast<std::size_t>(j)] = static_cast<float>(embeddings(j, t));
    for (Eigen::Index j = 0; j < c; ++j) o.logits[static_cast<std::size_t>(j)] = static_cast<float>(logits(j, t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Taxonomy

TaxonomyMap::TaxonomyMap(std::vector<TaxonomyEntry> entries, std::vector<std::string> species)
    : species_(std::move(species)) {
  std::unordered_set<std::string> seen;
  for (const auto& s : species_)
    if (!seen.insert(s).second) throw ValidationError("taxonomy: duplicate species code '" + s + "'");
  int max_index = -1;
  for (const auto& e : entries) {
    if (e.class_index < 0) throw ValidationError("taxonomy: negative class index");
    max_index = std::max(max_index, e.class_index);
  }
  entries_.resize(static_cast<std::size_t>(max_index + 1));
  std::vector<bool> filled(entries_.size(), false);
  for (auto& e : entries) {
    const auto i = static_cast<std::size_t>(e.class_index);
    if (filled[i]) throw ValidationError("taxonomy: duplicate class index " + std::to_string(e.class_index));
    filled[i] = true;
    entries_[i] = std::move(e);
  }
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (!filled[i]) entries_[i].class_index = static_cast<int>(i);
}

TaxonomyMap TaxonomyMap::load_csv(const fs::path& path) {
  const auto rows = read_csv(path);
  std::vector<TaxonomyEntry> entries;
  std::vector<std::string> species;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (r == 0 && !row.empty() && trim(row[0]) == "backend_class_index") continue;
    if (row.size() < 2 || row.size() > 3)
      throw ValidationError(path.string() + ": line " + std::to_string(r + 1) + ": expected 3 columns");
    TaxonomyEntry e;
    try {
      e.class_index = std::stoi(row[0]);
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ": line " + std::to_string(r + 1) + ": bad class index");
    }
    e.label = row[1];
    const std::string code = row.size() == 3 ? trim(row[2]) : std::string{};
    if (!code.empty()) {
      e.species = code;
      if (seen.insert(code).second) species.push_back(code);
    }
    entries.push_back(std::move(e));
  }
  return TaxonomyMap(std::move(entries), std::move(species));
}

void TaxonomyMap::save_csv(const fs::path& path) const {
  atomic_write(path, [&](std::ostream& out) {
    out << "backend_class_index,backend_label,species_code\n";
    for (const auto& e : entries_)
      out << e.class_index << ',' << csv_escape(e.label) << ',' << csv_escape(e.species.value_or("")) << '\n';
  });
}

TaxonomyMap TaxonomyMap::synthetic(int class_dim, int species_count) {
  std::vector<TaxonomyEntry> entries;
  std::vector<std::string> species;
  char buf[32];
  for (int i = 0; i < class_dim; ++i) {
    TaxonomyEntry e;
    e.class_index = i;
    if (i < species_count) {
      std::snprintf(buf, sizeof buf, "syn%03d", i);
      e.species = buf;
      species.emplace_back(buf);
      e.label = std::string("Synthetica band") + std::to_string(i) + "_Synthetic " + buf;
    } else {
      e.label = "Background class " + std::to_string(i);
    }
    entries.push_back(std::move(e));
  }
  return TaxonomyMap(std::move(entries), std::move(species));
}

const std::string& TaxonomyMap::label_of(int class_index) const {
  static const std::string kEmpty;
  if (class_index < 0 || static_cast<std::size_t>(class_index) >= entries_.size()) return kEmpty;
  return entries_[static_cast<std::size_t>(class_index)].label;
}

std::optional<std::string> TaxonomyMap::species_of(int class_index) const {
  if (class_index < 0 || static_cast<std::size_t>(class_index) >= entries_.size()) return std::nullopt;
  return entries_[static_cast<std::size_t>(class_index)].species;
}

bool TaxonomyMap::has_species(std::string_view code) const {
  return std::find(species_.begin(), species_.end(), code) != species_.end();
}

double max_probability(std::span<const float> logits) {
  if (logits.empty()) return 0.0;
  double mx = -std::numeric_limits<double>::infinity();
  for (float v : logits) mx = std::max(mx, static_cast<double>(v));
  double total = 0.0;
  for (float v : logits) total += std::exp(static_cast<double>(v) - mx);
  return 1.0 / total;
}

// ---------------------------------------------------------------------------
// Embed protocol lines

std::string encode_embedder_output(const EmbedderOutput& out) {
  std::string s = "{\"start_time\":" + std::to_string(out.start_time) + ",\"embedding\":[";
  for (std::size_t i = 0; i < out.embedding.size(); ++i) {
    if (i) s += ',';
    s += format_number(out.embedding[i]);
  }
  s += "],\"logits\":[";
  for (std::size_t i = 0; i < out.logits.size(); ++i) {
    if (i) s += ',';
    s += format_number(out.logits[i]);
  }
  s += "]}";
  return s;
}

namespace {
std::vector<float> float_array(const Json& j, const char* key, int expected) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array()) throw ValidationError(std::string("embed output: missing array '") + key + "'");
  if (static_cast<int>(it->size()) != expected)
    throw ValidationError(std::string("embed output: '") + key + "' has length " + std::to_string(it->size()) +
                          ", expected " + std::to_string(expected));
  std::vector<float> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) throw ValidationError(std::string("embed output: non-numeric value in '") + key + "'");
    const auto f = static_cast<float>(v.get<double>());
    if (!std::isfinite(f)) throw ValidationError(std::string("embed output: non-finite value in '") + key + "'");
    out.push_back(f);
  }
  return out;
}
}  // namespace

EmbedderOutput decode_embedder_output(std::string_view line, int embed_dim, int class_dim) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("embed output: invalid JSON: ") + e.what());
  }
  EmbedderOutput out;
  if (!j.contains("start_time") || !j["start_time"].is_number_integer())
    throw ValidationError("embed output: missing integer 'start_time'");
  out.start_time = j["start_time"].get<int>();
  out.embedding = float_array(j, "embedding", embed_dim);
  out.logits = float_array(j, "logits", class_dim);
  return out;
}

std::vector<EmbedderOutput> read_embedder_outputs(const fs::path& path, int embed_dim, int class_dim) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open " + path.string());
  std::vector<EmbedderOutput> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(decode_embedder_output(line, embed_dim, class_dim));
  }
  return out;
}

void write_embedder_outputs(const fs::path& path, std::span<const EmbedderOutput> outputs) {
  atomic_write(path, [&](std::ostream& os) {
    for (const auto& o : outputs) os << encode_embedder_output(o) << '\n';
  });
}

Backends make_synthetic_backends() {
  return {std::make_shared<SyntheticSeparator>(), std::make_shared<SyntheticEmbedder>()};
}

Backends make_backends() {
  const char* cmd = std::getenv(kBackendEnvVar);
  if (cmd == nullptr || trim(cmd).empty()) return make_synthetic_backends();
  return {std::make_shared<SubprocessSeparator>(cmd), std::make_shared<SubprocessEmbedder>(cmd)};
}

}  // namespace embercall
