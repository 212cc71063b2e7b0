#include "embercall/build.hpp"

#include <set>

#include "embercall/dataset.hpp"

namespace embercall {

std::vector<CorpusTrack> load_corpus(const fs::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw ValidationError(path.string() + ": empty corpus manifest (missing header)");
  const std::vector<std::string> expected{"track_stem", "wav_path", "primary_label", "secondary_labels"};
  std::vector<std::string> header;
  for (const auto& h : rows.front()) header.push_back(trim(h));
  if (header.size() < 3 || !std::equal(header.begin(), header.end(), expected.begin(),
                                       expected.begin() + static_cast<std::ptrdiff_t>(std::min(header.size(), expected.size()))))
    throw ValidationError(path.string() + ": header must be track_stem,wav_path,primary_label,secondary_labels");

  std::vector<CorpusTrack> tracks;
  std::set<std::string> seen;
  const fs::path base = path.parent_path();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = path.string() + ": line " + std::to_string(r + 1);
    if (row.size() < 3 || row.size() > 4) throw ValidationError(where + ": expected 4 columns");
    CorpusTrack t;
    t.track_stem = trim(row[0]);
    t.wav_path = trim(row[1]);
    t.primary_label = trim(row[2]);
    if (row.size() == 4) t.secondary_labels = split(row[3], ' ');
    if (t.track_stem.empty() || t.wav_path.empty() || t.primary_label.empty())
      throw ValidationError(where + ": empty track_stem, wav_path or primary_label");
    if (parent_stem(t.track_stem) != t.track_stem)
      throw ValidationError(where + ": track stem '" + t.track_stem + "' must not carry a _partNNN suffix");
    if (t.track_stem.find_first_of("/\\") != std::string::npos)
      throw ValidationError(where + ": track stem '" + t.track_stem + "' must not contain path separators");
    if (!seen.insert(t.track_stem).second) throw ValidationError(where + ": duplicate track stem '" + t.track_stem + "'");
    if (t.wav_path.is_relative()) t.wav_path = base / t.wav_path;
    tracks.push_back(std::move(t));
  }
  return tracks;
}

void save_corpus(const fs::path& path, std::span<const CorpusTrack> tracks) {
  atomic_write(path, [&](std::ostream& out) {
    out << "track_stem,wav_path,primary_label,secondary_labels\n";
    for (const auto& t : tracks) {
      std::string secondaries;
      for (const auto& s : t.secondary_labels) secondaries += (secondaries.empty() ? "" : " ") + s;
      out << csv_escape(t.track_stem) << ',' << csv_escape(t.wav_path.string()) << ',' << csv_escape(t.primary_label) << ','
          << csv_escape(secondaries) << '\n';
    }
  });
}

void BuildConfig::validate() const {
  if (out.empty()) throw ValidationError("build: output directory is required");
  if (version.empty() || version.find_first_of("/\\") != std::string::npos)
    throw ValidationError("build: invalid dataset version '" + version + "'");
  if (num_sources != 4 && num_sources != 8) throw ValidationError("build: num_sources must be 4 or 8");
  if (!(chunk_threshold_s > 0.0)) throw ValidationError("build: chunk threshold must be > 0");
  if (!(noise_amplitude >= 0.0f)) throw ValidationError("build: noise amplitude must be >= 0");
  policy.validate();
}

nlohmann::json BuildConfig::to_json(const Backends& backends) const {
  return {{"version", version},
          {"seed", seed},
          {"num_sources", num_sources},
          {"chunk_threshold_s", chunk_threshold_s},
          {"noise_amplitude", noise_amplitude},
          {"selector", to_string(selector)},
          {"policy", to_string(policy.kind)},
          {"threshold", policy.threshold},
          {"taxonomy", taxonomy.empty() ? std::string("synthetic") : taxonomy.string()},
          {"separator", backends.separator->describe()},
          {"embedder", backends.embedder->describe()},
          {"embed_dim", backends.embedder->embed_dim()},
          {"class_dim", backends.embedder->class_dim()}};
}

fs::path BuildLayout::source_wav(const std::string& chunk, std::size_t k) const {
  return work() / "sources" / chunk / (source_name(k) + ".wav");
}

fs::path BuildLayout::embedding(const std::string& chunk, const std::string& track_type) const {
  return work() / "embeddings" / chunk / (track_type + ".ndjson");
}

TaxonomyMap load_taxonomy(const fs::path& path) {
  return path.empty() ? TaxonomyMap::synthetic() : TaxonomyMap::load_csv(path);
}

namespace {

fs::path config_file(const BuildLayout& layout) { return layout.work() / "build_config.json"; }

}  // namespace

TaskGraph plan_build(std::span<const CorpusTrack> corpus, const BuildConfig& config,
                     std::shared_ptr<const Backends> backends, std::shared_ptr<const TaxonomyMap> taxonomy) {
  config.validate();
  if (!backends || !backends->separator || !backends->embedder) throw ValidationError("build: backends are required");
  if (!taxonomy) throw ValidationError("build: taxonomy is required");
  const BuildLayout layout{config.out};
  const fs::path cfg = config_file(layout);
  TaskGraph graph;
  std::vector<fs::path> shards;
  std::set<std::string> stems;
  auto metadata = std::make_shared<TrackMetadata>();

  for (const auto& track : corpus) {
    if (!stems.insert(track.track_stem).second)
      throw ValidationError("build: duplicate track stem '" + track.track_stem + "'");
    metadata->add(track.track_stem, {track.primary_label, track.secondary_labels});
    const WavInfo info = read_wav_info(track.wav_path);
    const ChunkPlan plan = recursive_chunk(info.frames, info.sample_rate, track.track_stem, config.chunk_threshold_s);

    std::vector<std::string> chunks;
    std::vector<fs::path> chunk_paths;
    for (std::size_t i = 0; i < plan.parts.size(); ++i) {
      chunks.push_back(plan.part_stem(i));
      chunk_paths.push_back(layout.chunk_wav(chunks.back()));
    }

    graph.add({"chunk:" + track.track_stem, {track.wav_path, cfg}, chunk_paths,
               [track, config, chunk_paths, sep_rate = backends->separator->sample_rate()] {
                 AudioClip clip = read_wav(track.wav_path);
                 clip.stem = track.track_stem;
                 clip.validate();
                 const ChunkPlan p = recursive_chunk(clip, config.chunk_threshold_s);
                 if (p.parts.size() != chunk_paths.size())
                   throw RuntimeError("chunk: " + track.wav_path.string() + " changed since planning");
                 for (std::size_t i = 0; i < p.parts.size(); ++i) {
                   AudioClip part = resample(extract_part(clip, p, i), sep_rate);
                   const auto seed = derive_seed({track.track_stem, std::to_string(i), std::to_string(config.seed)});
                   part = pad_to_multiple(part, kWindowSeconds, config.noise_amplitude, seed);
                   write_wav(chunk_paths[i], part);
                 }
               }});

    for (const auto& chunk : chunks) {
      const fs::path chunk_wav = layout.chunk_wav(chunk);
      std::vector<fs::path> source_paths;
      for (int k = 0; k < config.num_sources; ++k) source_paths.push_back(layout.source_wav(chunk, static_cast<std::size_t>(k)));

      graph.add({"separate:" + chunk, {chunk_wav}, source_paths, [backends, chunk_wav, source_paths, chunk, config] {
                   AudioClip clip = read_wav(chunk_wav);
                   clip.stem = chunk;
                   const SeparationResult result = backends->separator->separate(clip, config.num_sources);
                   if (result.sources.size() != source_paths.size())
                     throw RuntimeError("separate: backend returned " + std::to_string(result.sources.size()) + " sources");
                   for (std::size_t k = 0; k < source_paths.size(); ++k) write_wav(source_paths[k], result.sources[k]);
                 }});

      std::vector<std::pair<std::string, fs::path>> channels{{kOriginalTrack, chunk_wav}};
      for (std::size_t k = 0; k < source_paths.size(); ++k) channels.emplace_back(source_name(k), source_paths[k]);
      std::vector<fs::path> embedding_paths;
      for (const auto& [type, wav] : channels) {
        const fs::path out = layout.embedding(chunk, type);
        embedding_paths.push_back(out);
        graph.add({"embed:" + chunk + ":" + type, {wav}, {out}, [backends, wav = wav, out, chunk, type = type] {
                     AudioClip clip = read_wav(wav);
                     clip.stem = chunk + "_" + type;
                     const auto outputs = backends->embedder->embed_windows(resample(clip, backends->embedder->sample_rate()));
                     write_embedder_outputs(out, outputs);
                   }});
      }

      std::vector<fs::path> annotate_inputs{chunk_wav};
      annotate_inputs.insert(annotate_inputs.end(), source_paths.begin(), source_paths.end());
      annotate_inputs.insert(annotate_inputs.end(), embedding_paths.begin(), embedding_paths.end());
      const fs::path annotation = layout.annotation(chunk);
      graph.add({"annotate:" + chunk, annotate_inputs, {annotation},
                 [backends, taxonomy, channels, embedding_paths, annotation, chunk, species = track.primary_label] {
                   const int d = backends->embedder->embed_dim();
                   const int c = backends->embedder->class_dim();
                   std::vector<double> original_energy;
                   std::vector<ChannelEmbeddings> embedded;
                   for (std::size_t i = 0; i < channels.size(); ++i) {
                     const auto energies = window_energies(read_wav(channels[i].second));
                     if (i == 0) original_energy = energies;
                     embedded.push_back({channels[i].first, read_embedder_outputs(embedding_paths[i], d, c), energies});
                   }
                   write_shard(assemble_rows(species, chunk, original_energy, embedded, *taxonomy), annotation);
                 }});

      const fs::path shard = layout.shard(chunk);
      shards.push_back(shard);
      graph.add({"shard:" + chunk, {annotation}, {shard}, [annotation, shard] {
                   write_shard(read_shard(annotation).rows, shard);
                 }});
    }
  }

  const fs::path dataset_dir = layout.dataset_dir(config.version);
  std::vector<fs::path> consolidate_inputs = shards;
  consolidate_inputs.push_back(cfg);
  graph.add({"consolidate:" + config.version,
             consolidate_inputs,
             {dataset_dir / kDatasetFile, dataset_dir / kManifestFile, dataset_dir / kMetadataFile},
             [shards, dataset_dir, metadata, version = config.version, manifest_config = config.to_json(*backends)] {
               consolidate(shards, {dataset_dir, version, manifest_config});
               metadata->save_csv(dataset_dir / kMetadataFile);
             }});
  return graph;
}

RunReport run_build(std::span<const CorpusTrack> corpus, const BuildConfig& config, int workers, bool resume) {
  config.validate();
  auto backends = std::make_shared<const Backends>(make_backends());
  auto taxonomy = std::make_shared<const TaxonomyMap>(load_taxonomy(config.taxonomy));
  const BuildLayout layout{config.out};

  // Rewritten only on change so an unchanged config keeps its hash.
  const std::string cfg_bytes = config.to_json(*backends).dump(2) + "\n";
  const fs::path cfg = config_file(layout);
  if (!fs::exists(cfg) || read_file(cfg) != cfg_bytes) atomic_write_bytes(cfg, cfg_bytes);

  const TaskGraph graph = plan_build(corpus, config, backends, taxonomy);
  RunReport report = execute(graph, {workers, resume, layout.state_file()});
  atomic_write_bytes(layout.report_file(), report.to_json().dump(2) + "\n");
  return report;
}

}  // namespace embercall
