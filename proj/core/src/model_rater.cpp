#include "cogload/model_rater.hpp"

#include "cogload/error.hpp"

namespace cogload::model {

ModelBundle fit_bundle(const Dataset& raw, const TrainingConfig& config, windowing::NormalizationScope scope) {
  windowing::Normalizer normalizer = windowing::fit_normalizer(raw, scope);
  TrainingResult result = train(normalizer.apply(raw), config);
  return {std::move(result.params), std::move(normalizer), config.seed};
}

control::Rating ModelRater::rate(const control::RatingContext& context) {
  if (context.features == nullptr) {
    throw Error(ErrorCode::MissingModality, "adaptive-controller: model rating needs the level's features");
  }
  ++invocations_;
  const Prediction p = forward(bundle_.params, bundle_.normalizer.apply(*context.features), false);
  return {p.label, p.probabilities};
}

}  // namespace cogload::model
