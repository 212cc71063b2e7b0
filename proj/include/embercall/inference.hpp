#pragma once

#include <string>
#include <vector>

#include "embercall/dataset.hpp"
#include "embercall/models/serialize.hpp"
#include "embercall/projection.hpp"

namespace embercall {

struct InferenceResult {
  std::vector<std::string> row_ids;  // {stem}_{interval_end_seconds}
  std::vector<std::string> classes;  // model classes
  models::Matrix probabilities;      // rows x model classes
  std::vector<std::string> species;  // submission columns (taxonomy order)
  models::Matrix submission;         // rows x species
};

/// Throws ValidationError unless every model class other than no-call is a
/// taxonomy species.
void check_model_taxonomy(const models::ModelFile& model, const TaxonomyMap& taxonomy);

/// Scores each 5 s interval of a soundscape (at least 5 s long). Species
/// the model does not know get probability 0.
InferenceResult infer_soundscape(const models::ModelFile& model, const AudioClip& soundscape, const Embedder& embedder,
                                 const TaxonomyMap& taxonomy);

/// CSV `row_id,<species...>`.
void write_submission(const fs::path& path, const InferenceResult& result);

/// PCA of the embeddings of the rows matching `conditions`; CSV
/// `track_name,start_time,label,x,y` with label = the row's species.
Projection project_dataset(const Dataset& dataset, std::span<const Condition> conditions, const fs::path& out_csv);

}  // namespace embercall
