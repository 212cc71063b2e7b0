#include "embercall/inference.hpp"

#include <map>

#include "embercall/features.hpp"

namespace embercall {

void check_model_taxonomy(const models::ModelFile& model, const TaxonomyMap& taxonomy) {
  std::string missing;
  for (const auto& c : model.classes)
    if (c != kNoCall && !taxonomy.has_species(c)) missing += " " + c;
  if (!missing.empty()) throw ValidationError("model/taxonomy species mismatch: not in taxonomy:" + missing);
}

InferenceResult infer_soundscape(const models::ModelFile& model, const AudioClip& soundscape, const Embedder& embedder,
                                 const TaxonomyMap& taxonomy) {
  if (!model.model) throw ValidationError("infer: model file has no model");
  check_model_taxonomy(model, taxonomy);
  soundscape.validate();
  if (soundscape.duration_seconds() < 5.0)
    throw ValidationError("infer: soundscape '" + soundscape.stem + "' is shorter than 5 s");
  const Variant variant = parse_variant(model.variant);
  const auto dim = feature_dim(variant, static_cast<std::size_t>(embedder.embed_dim()),
                               static_cast<std::size_t>(embedder.class_dim()));
  if (static_cast<std::size_t>(model.model->input_dim()) != dim)
    throw ValidationError("infer: model expects " + std::to_string(model.model->input_dim()) + " features but variant " +
                          model.variant + " with this embedder gives " + std::to_string(dim));

  const auto windows = embedder.embed_windows(resample(soundscape, embedder.sample_rate()));
  const auto features = interval_features(variant, windows);
  if (features.empty()) throw ValidationError("infer: soundscape has no complete 5 s interval");

  InferenceResult r;
  r.classes = model.classes;
  r.species = taxonomy.species();
  for (std::size_t k = 0; k < features.size(); ++k)
    r.row_ids.push_back(soundscape.stem + "_" + std::to_string(5 * (k + 1)));
  r.probabilities = model.model->predict_proba(models::to_matrix(features));

  std::map<std::string, Eigen::Index> column;
  for (std::size_t c = 0; c < r.classes.size(); ++c) column[r.classes[c]] = static_cast<Eigen::Index>(c);
  r.submission = models::Matrix::Zero(r.probabilities.rows(), static_cast<Eigen::Index>(r.species.size()));
  for (std::size_t s = 0; s < r.species.size(); ++s)
    if (auto it = column.find(r.species[s]); it != column.end())
      r.submission.col(static_cast<Eigen::Index>(s)) = r.probabilities.col(it->second);
  return r;
}

void write_submission(const fs::path& path, const InferenceResult& result) {
  atomic_write(path, [&](std::ostream& out) {
    out << "row_id";
    for (const auto& s : result.species) out << ',' << csv_escape(s);
    out << '\n';
    for (std::size_t i = 0; i < result.row_ids.size(); ++i) {
      out << csv_escape(result.row_ids[i]);
      for (Eigen::Index c = 0; c < result.submission.cols(); ++c)
        out << ',' << format_number(result.submission(static_cast<Eigen::Index>(i), c));
      out << '\n';
    }
  });
}

Projection project_dataset(const Dataset& dataset, std::span<const Condition> conditions, const fs::path& out_csv) {
  const auto idx = filter(dataset.rows, conditions);
  if (idx.size() < 3) throw ValidationError("project: need at least 3 rows after filtering, got " + std::to_string(idx.size()));
  std::vector<std::vector<double>> values;
  for (std::size_t i : idx) values.emplace_back(dataset.rows[i].embedding.begin(), dataset.rows[i].embedding.end());
  const Projection p = pca2(models::to_matrix(values));
  atomic_write(out_csv, [&](std::ostream& out) {
    out << "track_name,start_time,label,x,y\n";
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& row = dataset.rows[idx[k]];
      out << csv_escape(row.track_name) << ',' << row.start_time << ',' << csv_escape(row.species) << ','
          << format_number(p.coords(static_cast<Eigen::Index>(k), 0)) << ','
          << format_number(p.coords(static_cast<Eigen::Index>(k), 1)) << '\n';
    }
  });
  return p;
}

}  // namespace embercall
