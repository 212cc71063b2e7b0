#include "embercall/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace embercall {

namespace {

std::string json_string(std::string_view s) { return Json(s).dump(); }

template <class T>
void append_array(std::string& out, const std::vector<T>& values) {
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_number(values[i]);
  }
  out += ']';
}

const Json& member(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("row: missing field '") + key + "'");
  return *it;
}

std::string string_field(const Json& j, const char* key) {
  const auto& v = member(j, key);
  if (!v.is_string()) throw ValidationError(std::string("row: field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<float> float_field(const Json& j, const char* key) {
  const auto& v = member(j, key);
  if (!v.is_array()) throw ValidationError(std::string("row: field '") + key + "' must be an array");
  std::vector<float> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw ValidationError(std::string("row: non-numeric value in '") + key + "'");
    out.push_back(static_cast<float>(x.get<double>()));
  }
  return out;
}

Json rows_header(std::string_view track_stem, std::size_t count) {
  Json h;
  h["schema"] = kRowsSchema;
  h["version"] = kRowsSchemaVersion;
  h["track_stem"] = track_stem;
  h["rows"] = count;
  return h;
}

std::string encode_rows(const Json& header, std::span<const EmbeddingRow> rows) {
  std::string out = header.dump();
  out += '\n';
  for (const auto& r : rows) {
    out += encode_row(r);
    out += '\n';
  }
  return out;
}

}  // namespace

std::string encode_row(const EmbeddingRow& row) {
  std::string s;
  s.reserve(16 * (row.embedding.size() + row.prediction_vec.size()) + 512);
  s += "{\"species\":" + json_string(row.species);
  s += ",\"track_stem\":" + json_string(row.track_stem);
  s += ",\"track_type\":" + json_string(row.track_type);
  s += ",\"track_name\":" + json_string(row.track_name);
  s += ",\"embedding\":";
  append_array(s, row.embedding);
  s += ",\"prediction_vec\":";
  append_array(s, row.prediction_vec);
  s += ",\"predictions\":[";
  for (std::size_t i = 0; i < row.predictions.size(); ++i) {
    const auto& p = row.predictions[i];
    if (i) s += ',';
    s += "{\"rank\":" + std::to_string(p.rank) + ",\"index\":" + std::to_string(p.index) +
         ",\"label\":" + json_string(p.label) + ",\"mapped_species\":" + (p.mapped_species ? json_string(*p.mapped_species) : "null") +
         ",\"probability\":" + format_number(p.probability) + "}";
  }
  s += "],\"start_time\":" + std::to_string(row.start_time);
  s += ",\"energy\":" + format_number(row.energy);
  s += ",\"channel_energy\":" + format_number(row.channel_energy);
  s += '}';
  return s;
}

EmbeddingRow decode_row(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("row: invalid JSON: ") + e.what());
  }
  EmbeddingRow row;
  row.species = string_field(j, "species");
  row.track_stem = string_field(j, "track_stem");
  row.track_type = string_field(j, "track_type");
  row.track_name = string_field(j, "track_name");
  row.embedding = float_field(j, "embedding");
  row.prediction_vec = float_field(j, "prediction_vec");
  const auto& preds = member(j, "predictions");
  if (!preds.is_array()) throw ValidationError("row: 'predictions' must be an array");
  for (const auto& p : preds) {
    Prediction pred;
    pred.rank = member(p, "rank").get<int>();
    pred.index = member(p, "index").get<int>();
    pred.label = string_field(p, "label");
    const auto& ms = member(p, "mapped_species");
    if (!ms.is_null()) pred.mapped_species = ms.get<std::string>();
    pred.probability = member(p, "probability").get<double>();
    row.predictions.push_back(std::move(pred));
  }
  const auto& st = member(j, "start_time");
  if (!st.is_number_integer()) throw ValidationError("row: 'start_time' must be an integer");
  row.start_time = st.get<int>();
  row.energy = member(j, "energy").get<double>();
  // Older files without the per-channel energy fall back to the original's.
  row.channel_energy = j.contains("channel_energy") ? j["channel_energy"].get<double>() : row.energy;
  return row;
}

RowsFile read_rows_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open " + path.string());
  RowsFile file;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      if (file.header.is_null()) {
        file.header = Json::parse(line);
        if (!file.header.is_object() || file.header.value("schema", "") != kRowsSchema)
          throw ValidationError("not an embedding rows file (bad header)");
        continue;
      }
      file.rows.push_back(decode_row(line));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (file.header.is_null()) throw ValidationError(path.string() + ": empty rows file (missing header)");
  const auto declared = file.header.value("rows", static_cast<std::size_t>(file.rows.size()));
  if (declared != file.rows.size())
    throw ValidationError(path.string() + ": header declares " + std::to_string(declared) + " rows, found " +
                          std::to_string(file.rows.size()));
  return file;
}

Shard write_shard(std::vector<EmbeddingRow> rows, const fs::path& path) {
  Shard shard;
  shard.path = path;
  shard.track_stem = rows.empty() ? path.stem().string() : rows.front().track_stem;
  for (const auto& r : rows)
    if (r.track_stem != shard.track_stem)
      throw ValidationError("write_shard: rows from more than one chunk ('" + shard.track_stem + "' and '" +
                            r.track_stem + "')");
  std::stable_sort(rows.begin(), rows.end(), [](const EmbeddingRow& a, const EmbeddingRow& b) {
    if (a.track_type != b.track_type) return a.track_type < b.track_type;
    return a.start_time < b.start_time;
  });
  const std::string bytes = encode_rows(rows_header(shard.track_stem, rows.size()), rows);
  atomic_write_bytes(path, bytes);
  shard.sha256 = sha256_hex(bytes);
  shard.rows = std::move(rows);
  return shard;
}

Shard read_shard(const fs::path& path) {
  auto file = read_rows_file(path);
  Shard shard;
  shard.path = path;
  shard.track_stem = file.header.value("track_stem", std::string{});
  shard.rows = std::move(file.rows);
  shard.sha256 = sha256_file(path);
  return shard;
}

Json DatasetManifest::to_json() const {
  Json j;
  j["version"] = version;
  j["config"] = config;
  j["rows"] = rows;
  j["dataset"] = kDatasetFile;
  j["dataset_sha256"] = dataset_sha256;
  Json shard_list = Json::array();
  for (const auto& s : shards) shard_list.push_back({{"path", s.path}, {"rows", s.rows}, {"sha256", s.sha256}});
  j["shards"] = std::move(shard_list);
  return j;
}

DatasetManifest DatasetManifest::from_json(const Json& j) {
  DatasetManifest m;
  try {
    m.version = j.at("version").get<std::string>();
    m.config = j.value("config", Json::object());
    m.rows = j.at("rows").get<std::size_t>();
    m.dataset_sha256 = j.value("dataset_sha256", std::string{});
    for (const auto& s : j.at("shards"))
      m.shards.push_back({s.at("path").get<std::string>(), s.at("rows").get<std::size_t>(), s.at("sha256").get<std::string>()});
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  return m;
}

DatasetManifest DatasetManifest::load(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("dataset manifest not found: " + path.string());
  try {
    return from_json(Json::parse(read_file(path)));
  } catch (const Json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

bool dataset_order(const EmbeddingRow& a, const EmbeddingRow& b) {
  if (a.species != b.species) return a.species < b.species;
  if (a.track_stem != b.track_stem) return a.track_stem < b.track_stem;
  if (a.track_type != b.track_type) return a.track_type < b.track_type;
  return a.start_time < b.start_time;
}

DatasetManifest consolidate(std::span<const fs::path> shard_paths, const ConsolidateOptions& options) {
  if (shard_paths.empty()) throw RuntimeError("consolidate: no shards");
  std::vector<std::string> missing;
  for (const auto& p : shard_paths)
    if (!fs::exists(p)) missing.push_back(p.stem().string());
  if (!missing.empty()) {
    std::string msg = "consolidate: missing shards for chunks:";
    for (const auto& m : missing) msg += " " + m;
    throw RuntimeError(msg);
  }

  DatasetManifest manifest;
  manifest.version = options.version;
  manifest.config = options.config;
  std::vector<EmbeddingRow> rows;
  for (const auto& p : shard_paths) {
    auto file = read_rows_file(p);
    manifest.shards.push_back({p.filename().string(), file.rows.size(), sha256_file(p)});
    for (auto& r : file.rows) rows.push_back(std::move(r));
  }
  std::sort(manifest.shards.begin(), manifest.shards.end(),
            [](const ShardEntry& a, const ShardEntry& b) { return std::tie(a.path, a.sha256) < std::tie(b.path, b.sha256); });
  std::stable_sort(rows.begin(), rows.end(), dataset_order);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& a = rows[i - 1];
    const auto& b = rows[i];
    if (a.track_name == b.track_name && a.start_time == b.start_time)
      throw RuntimeError("consolidate: duplicate row " + b.track_name + " @ " + std::to_string(b.start_time) +
                         " s (chunk '" + b.track_stem + "' appears in more than one shard)");
  }
  manifest.rows = rows.size();

  const std::string bytes = encode_rows(rows_header("", rows.size()), rows);
  manifest.dataset_sha256 = sha256_hex(bytes);
  atomic_write_bytes(options.out_dir / kDatasetFile, bytes);
  atomic_write_bytes(options.out_dir / kManifestFile, manifest.to_json().dump(2) + "\n");
  return manifest;
}

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.dir = dir;
  ds.manifest = DatasetManifest::load(dir / kManifestFile);
  ds.rows = read_rows_file(dir / kDatasetFile).rows;
  if (ds.rows.size() != ds.manifest.rows)
    throw ValidationError(dir.string() + ": manifest declares " + std::to_string(ds.manifest.rows) + " rows, dataset has " +
                          std::to_string(ds.rows.size()));
  if (fs::exists(dir / kMetadataFile)) ds.metadata = TrackMetadata::load_csv(dir / kMetadataFile);
  return ds;
}

// ---------------------------------------------------------------------------
// Filters

namespace {

enum class ColumnKind { Text, Number };

ColumnKind column_kind(std::string_view column) {
  if (column == "species" || column == "track_stem" || column == "track_type" || column == "track_name")
    return ColumnKind::Text;
  if (column == "start_time" || column == "energy" || column == "channel_energy") return ColumnKind::Number;
  throw ValidationError("filter: unknown column '" + std::string(column) + "'");
}

std::string_view text_value(const EmbeddingRow& r, std::string_view column) {
  if (column == "species") return r.species;
  if (column == "track_stem") return r.track_stem;
  if (column == "track_type") return r.track_type;
  return r.track_name;
}

double number_value(const EmbeddingRow& r, std::string_view column) {
  if (column == "start_time") return r.start_time;
  if (column == "energy") return r.energy;
  return r.channel_energy;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ValidationError("filter: '" + s + "' is not a number");
  return v;
}

template <class T>
bool compare(const T& lhs, Condition::Op op, const T& rhs) {
  switch (op) {
    case Condition::Op::Eq:
    case Condition::Op::In:
      return lhs == rhs;
    case Condition::Op::Ne:
      return lhs != rhs;
    case Condition::Op::Lt:
      return lhs < rhs;
    case Condition::Op::Le:
      return lhs <= rhs;
    case Condition::Op::Gt:
      return lhs > rhs;
    case Condition::Op::Ge:
      return lhs >= rhs;
  }
  return false;
}

}  // namespace

std::vector<Condition> parse_filter(std::string_view expr) {
  std::vector<Condition> out;
  for (const auto& clause : split(expr, ';')) {
    Condition c;
    if (const auto pos = clause.find(" in "); pos != std::string::npos) {
      c.column = trim(clause.substr(0, pos));
      c.op = Condition::Op::In;
      c.values = split(clause.substr(pos + 4), '|');
    } else {
      static const std::pair<const char*, Condition::Op> kOps[] = {
          {"!=", Condition::Op::Ne}, {">=", Condition::Op::Ge}, {"<=", Condition::Op::Le},
          {"=", Condition::Op::Eq},  {">", Condition::Op::Gt},  {"<", Condition::Op::Lt}};
      bool matched = false;
      for (const auto& [token, op] : kOps) {
        const auto pos = clause.find(token);
        if (pos == std::string::npos) continue;
        c.column = trim(clause.substr(0, pos));
        c.op = op;
        c.values = {trim(clause.substr(pos + std::char_traits<char>::length(token)))};
        matched = true;
        break;
      }
      if (!matched) throw ValidationError("filter: cannot parse clause '" + clause + "'");
    }
    column_kind(c.column);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::size_t> filter(std::span<const EmbeddingRow> rows, std::span<const Condition> conditions) {
  struct Compiled {
    const Condition* cond;
    ColumnKind kind;
    std::vector<double> numbers;
  };
  std::vector<Compiled> compiled;
  for (const auto& c : conditions) {
    Compiled cc{&c, column_kind(c.column), {}};
    if (c.values.empty()) throw ValidationError("filter: no value for column '" + c.column + "'");
    if (cc.kind == ColumnKind::Number)
      for (const auto& v : c.values) cc.numbers.push_back(parse_double(v));
    compiled.push_back(std::move(cc));
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bool keep = true;
    for (const auto& cc : compiled) {
      const auto& c = *cc.cond;
      bool any = false;
      if (cc.kind == ColumnKind::Text) {
        const std::string_view v = text_value(rows[i], c.column);
        for (const auto& rhs : c.values) any = any || compare(v, c.op, std::string_view(rhs));
      } else {
        const double v = number_value(rows[i], c.column);
        for (double rhs : cc.numbers) any = any || compare(v, c.op, rhs);
      }
      if (!any) {
        keep = false;
        break;
      }
    }
    if (keep) out.push_back(i);
  }
  return out;
}

}  // namespace embercall
