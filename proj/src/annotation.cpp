#include "embercall/annotation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <unordered_map>

namespace embercall {

std::string make_track_name(std::string_view species, std::string_view track_stem, std::string_view track_type) {
  std::string s(species);
  s += '/';
  s += track_stem;
  s += '_';
  s += track_type;
  s += ".wav";
  return s;
}

std::vector<Prediction> top_predictions(std::span<const float> logits, const TaxonomyMap& taxonomy, int k) {
  const auto probs = softmax(logits);
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  const auto take = static_cast<std::size_t>(std::min<int>(k, static_cast<int>(order.size())));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), [&](int a, int b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  });
  std::vector<Prediction> out;
  for (std::size_t r = 0; r < take; ++r) {
    const int idx = order[r];
    out.push_back({static_cast<int>(r), idx, taxonomy.label_of(idx), taxonomy.species_of(idx), probs[idx]});
  }
  return out;
}

std::vector<double> window_energies(const AudioClip& clip) {
  std::vector<double> out;
  for (const auto& w : slide_windows(clip, kWindowSeconds, kHopSeconds)) out.push_back(energy(w.samples));
  return out;
}

std::vector<EmbeddingRow> assemble_rows(std::string_view species, std::string_view track_stem,
                                        std::span<const double> original_energy,
                                        std::span<const ChannelEmbeddings> channels, const TaxonomyMap& taxonomy) {
  std::vector<EmbeddingRow> rows;
  for (const auto& ch : channels) {
    if (ch.window_energy.size() != ch.outputs.size())
      throw RuntimeError("annotate: channel " + ch.track_type + " has " + std::to_string(ch.outputs.size()) +
                         " embeddings but " + std::to_string(ch.window_energy.size()) + " energies");
    for (std::size_t i = 0; i < ch.outputs.size(); ++i) {
      const auto& o = ch.outputs[i];
      if (o.start_time < 0 || static_cast<std::size_t>(o.start_time) >= original_energy.size())
        throw RuntimeError("annotate: channel " + ch.track_type + " window at " + std::to_string(o.start_time) +
                           " s has no matching original window");
      EmbeddingRow row;
      row.species = species;
      row.track_stem = track_stem;
      row.track_type = ch.track_type;
      row.track_name = make_track_name(species, track_stem, ch.track_type);
      row.embedding = o.embedding;
      row.prediction_vec = o.logits;
      row.predictions = top_predictions(o.logits, taxonomy);
      row.start_time = o.start_time;
      row.energy = original_energy[static_cast<std::size_t>(o.start_time)];
      row.channel_energy = ch.window_energy[i];
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<EmbeddingRow> annotate_chunk(const AudioClip& chunk, const SeparationResult& sources,
                                         const Embedder& embedder, const TaxonomyMap& taxonomy,
                                         std::string_view species) {
  const auto original_energy = window_energies(chunk);
  std::vector<ChannelEmbeddings> channels;
  channels.push_back({kOriginalTrack, embedder.embed_windows(resample(chunk, embedder.sample_rate())), original_energy});
  for (std::size_t k = 0; k < sources.sources.size(); ++k) {
    const auto& src = sources.sources[k];
    channels.push_back({source_name(k), embedder.embed_windows(resample(src, embedder.sample_rate())),
                        window_energies(src)});
  }
  return assemble_rows(species, chunk.stem, original_energy, channels, taxonomy);
}

ChannelSelectorKind parse_selector(std::string_view s) {
  if (s == "max_energy") return ChannelSelectorKind::MaxEnergy;
  if (s == "max_positive_classifications") return ChannelSelectorKind::MaxPositiveClassifications;
  if (s == "original_plus_best") return ChannelSelectorKind::OriginalPlusBest;
  throw ValidationError("unknown channel selector '" + std::string(s) +
                        "' (expected max_energy, max_positive_classifications or original_plus_best)");
}

std::string to_string(ChannelSelectorKind k) {
  switch (k) {
    case ChannelSelectorKind::MaxEnergy:
      return "max_energy";
    case ChannelSelectorKind::MaxPositiveClassifications:
      return "max_positive_classifications";
    case ChannelSelectorKind::OriginalPlusBest:
      return "original_plus_best";
  }
  return {};
}

LabelPolicyKind parse_policy(std::string_view s) {
  if (s == "threshold_primary") return LabelPolicyKind::ThresholdPrimary;
  if (s == "multilabel_primary_secondary") return LabelPolicyKind::MultilabelPrimarySecondary;
  if (s == "metadata_filtered") return LabelPolicyKind::MetadataFiltered;
  throw ValidationError("unknown label policy '" + std::string(s) +
                        "' (expected threshold_primary, multilabel_primary_secondary or metadata_filtered)");
}

std::string to_string(LabelPolicyKind k) {
  switch (k) {
    case LabelPolicyKind::ThresholdPrimary:
      return "threshold_primary";
    case LabelPolicyKind::MultilabelPrimarySecondary:
      return "multilabel_primary_secondary";
    case LabelPolicyKind::MetadataFiltered:
      return "metadata_filtered";
  }
  return {};
}

void LabelPolicy::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ValidationError("label threshold must be in (0, 1), got " + format_number(threshold));
}

namespace {

/// source index of a track_type, or -1 for the original channel.
int source_index(std::string_view track_type) {
  if (track_type == kOriginalTrack) return -1;
  if (track_type.substr(0, 6) != "source") throw ValidationError("unknown track_type '" + std::string(track_type) + "'");
  try {
    return std::stoi(std::string(track_type.substr(6)));
  } catch (const std::exception&) {
    throw ValidationError("unknown track_type '" + std::string(track_type) + "'");
  }
}

}  // namespace

std::vector<std::size_t> select_channel(std::span<const EmbeddingRow> rows, ChannelSelectorKind selector,
                                        double threshold) {
  struct SourceStats {
    double energy_sum = 0.0;
    std::size_t windows = 0;
    std::size_t positives = 0;
  };
  // track_stem -> source index -> stats
  std::map<std::string, std::map<int, SourceStats>, std::less<>> groups;
  for (const auto& row : rows) {
    auto& group = groups[row.track_stem];
    const int src = source_index(row.track_type);
    if (src < 0) continue;
    auto& st = group[src];
    st.energy_sum += row.channel_energy;
    ++st.windows;
    if (selector == ChannelSelectorKind::MaxPositiveClassifications && max_probability(row.prediction_vec) >= threshold)
      ++st.positives;
  }

  std::map<std::string, int, std::less<>> winner;
  for (const auto& [stem, sources] : groups) {
    if (sources.empty()) throw ValidationError("select_channel: track '" + stem + "' has no source channels");
    int best = -1;
    double best_score = 0.0;
    // std::map iterates sources in ascending index, so ties keep the lowest.
    for (const auto& [src, st] : sources) {
      const double score = selector == ChannelSelectorKind::MaxPositiveClassifications
                               ? static_cast<double>(st.positives)
                               : st.energy_sum / static_cast<double>(st.windows);
      if (best < 0 || score > best_score) {
        best = src;
        best_score = score;
      }
    }
    winner[stem] = best;
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int src = source_index(rows[i].track_type);
    const int best = winner.find(rows[i].track_stem)->second;
    if (src == best || (src < 0 && selector == ChannelSelectorKind::OriginalPlusBest)) kept.push_back(i);
  }
  return kept;
}

void TrackMetadata::add(std::string track_stem, TrackLabels labels) {
  if (!tracks_.emplace(std::move(track_stem), std::move(labels)).second)
    throw ValidationError("duplicate track metadata entry");
}

bool TrackMetadata::contains(std::string_view track_stem) const {
  return tracks_.find(track_stem) != tracks_.end() || tracks_.find(parent_stem(track_stem)) != tracks_.end();
}

const TrackLabels& TrackMetadata::lookup(std::string_view track_stem) const {
  if (auto it = tracks_.find(track_stem); it != tracks_.end()) return it->second;
  if (auto it = tracks_.find(parent_stem(track_stem)); it != tracks_.end()) return it->second;
  throw ValidationError("no metadata for track '" + std::string(track_stem) + "'");
}

TrackMetadata TrackMetadata::load_csv(const fs::path& path) {
  TrackMetadata md;
  const auto rows = read_csv(path);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (r == 0 && !row.empty() && trim(row[0]) == "track_stem") continue;
    if (row.size() < 2 || row.size() > 3)
      throw ValidationError(path.string() + ": line " + std::to_string(r + 1) + ": expected 3 columns");
    TrackLabels labels;
    labels.primary = trim(row[1]);
    if (labels.primary.empty()) throw ValidationError(path.string() + ": line " + std::to_string(r + 1) + ": empty primary label");
    if (row.size() == 3) labels.secondaries = split(row[2], ' ');
    md.add(trim(row[0]), std::move(labels));
  }
  return md;
}

void TrackMetadata::save_csv(const fs::path& path) const {
  atomic_write(path, [&](std::ostream& out) {
    out << "track_stem,primary_label,secondary_labels\n";
    for (const auto& [stem, labels] : tracks_) {
      std::string secondaries;
      for (const auto& s : labels.secondaries) secondaries += (secondaries.empty() ? "" : " ") + s;
      out << csv_escape(stem) << ',' << csv_escape(labels.primary) << ',' << csv_escape(secondaries) << '\n';
    }
  });
}

std::vector<std::string> assign_labels(const EmbeddingRow& row, const LabelPolicy& policy,
                                       const TrackMetadata& metadata) {
  const TrackLabels& md = metadata.lookup(row.track_stem);
  std::set<std::string> labels;
  switch (policy.kind) {
    case LabelPolicyKind::ThresholdPrimary:
      if (max_probability(row.prediction_vec) >= policy.threshold) labels.insert(md.primary);
      break;
    case LabelPolicyKind::MultilabelPrimarySecondary:
      labels.insert(md.primary);
      labels.insert(md.secondaries.begin(), md.secondaries.end());
      break;
    case LabelPolicyKind::MetadataFiltered: {
      std::set<std::string> plausible(md.secondaries.begin(), md.secondaries.end());
      plausible.insert(md.primary);
      // Recomputed from the logits so stored predictions cannot drift from them.
      const auto probs = softmax(row.prediction_vec);
      for (const auto& p : row.predictions) {
        if (!p.mapped_species || p.index < 0 || static_cast<std::size_t>(p.index) >= probs.size()) continue;
        if (probs[static_cast<std::size_t>(p.index)] >= policy.threshold && plausible.count(*p.mapped_species))
          labels.insert(*p.mapped_species);
      }
      break;
    }
  }
  labels.erase(kNoCall);
  if (labels.empty()) return {kNoCall};
  return {labels.begin(), labels.end()};
}

std::string format_balance(double positive_fraction) {
  const double pos = std::round(positive_fraction * 1000.0) / 10.0;
  const double neg = std::round((100.0 - pos) * 10.0) / 10.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f%% positive / %.1f%% negative", pos, neg);
  return buf;
}

std::string NoCallDataset::balance_report() const { return format_balance(positive_fraction); }

NoCallDataset build_nocall_dataset(std::span<const EmbeddingRow> rows, double threshold, int top_n) {
  std::set<std::string> allowed;
  if (top_n > 0) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : rows) ++counts[r.species];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(top_n); ++i) allowed.insert(ranked[i].first);
  }
  NoCallDataset ds;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (top_n > 0 && !allowed.count(rows[i].species)) continue;
    const int call = max_probability(rows[i].prediction_vec) >= threshold ? 1 : 0;
    ds.rows.push_back(i);
    ds.is_call.push_back(call);
    positives += static_cast<std::size_t>(call);
  }
  ds.positive_fraction = ds.rows.empty() ? 0.0 : static_cast<double>(positives) / static_cast<double>(ds.rows.size());
  return ds;
}

}  // namespace embercall
