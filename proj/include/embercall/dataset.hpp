#pragma once

#include <string>
#include <vector>

#include "embercall/annotation.hpp"
#include "nlohmann/json.hpp"

namespace embercall {

using Json = nlohmann::json;

/// Rows files (shards and consolidated datasets) are NDJSON: a header object
/// on the first line, then one row object per line.
inline constexpr const char* kRowsSchema = "embercall.embedding_rows";
inline constexpr int kRowsSchemaVersion = 1;

inline constexpr const char* kDatasetFile = "dataset.ndjson";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kMetadataFile = "metadata.csv";

std::string encode_row(const EmbeddingRow& row);
EmbeddingRow decode_row(std::string_view line);

struct RowsFile {
  Json header;
  std::vector<EmbeddingRow> rows;
};

RowsFile read_rows_file(const fs::path& path);

struct Shard {
  fs::path path;
  std::string track_stem;
  std::vector<EmbeddingRow> rows;
  std::string sha256;
};

/// Sorts rows by (track_type, start_time) and writes them atomically. All rows
/// must come from one chunk. An empty row list yields a header-only shard.
Shard write_shard(std::vector<EmbeddingRow> rows, const fs::path& path);
Shard read_shard(const fs::path& path);

struct ShardEntry {
  std::string path;  // file name, so manifests do not depend on the work dir
  std::size_t rows = 0;
  std::string sha256;
};

struct DatasetManifest {
  std::string version;
  Json config = Json::object();
  std::vector<ShardEntry> shards;
  std::size_t rows = 0;
  std::string dataset_sha256;

  Json to_json() const;
  static DatasetManifest from_json(const Json& j);
  static DatasetManifest load(const fs::path& path);
};

struct ConsolidateOptions {
  fs::path out_dir;
  std::string version = "emb_v4";
  Json config = Json::object();
};

/// Merges shards into out_dir/dataset.ndjson in (species, track_stem,
/// track_type, start_time) order and writes out_dir/manifest.json. Missing
/// shard files and duplicate (track_name, start_time) rows are errors.
DatasetManifest consolidate(std::span<const fs::path> shard_paths, const ConsolidateOptions& options);

/// Global dataset order.
bool dataset_order(const EmbeddingRow& a, const EmbeddingRow& b);

struct Dataset {
  fs::path dir;
  DatasetManifest manifest;
  std::vector<EmbeddingRow> rows;
  TrackMetadata metadata;  // empty when the dataset has no metadata.csv
};

Dataset load_dataset(const fs::path& dir);

/// One predicate over a row column. Columns: species, track_stem, track_type,
/// track_name, start_time, energy, channel_energy.
struct Condition {
  enum class Op { Eq, Ne, Lt, Le, Gt, Ge, In };
  std::string column;
  Op op = Op::Eq;
  std::vector<std::string> values;
};

/// `species=grecor;track_type!=original;start_time>=10;species in a|b`.
std::vector<Condition> parse_filter(std::string_view expr);

/// Stable-order indices of rows matching every condition. Unknown columns
/// throw ValidationError.
std::vector<std::size_t> filter(std::span<const EmbeddingRow> rows, std::span<const Condition> conditions);

}  // namespace embercall
