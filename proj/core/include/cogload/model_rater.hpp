#pragma once

#include "cogload/controller.hpp"
#include "cogload/model_io.hpp"
#include "cogload/training.hpp"

#include <cstddef>

namespace cogload::model {

/// Normalizer fitted on all of `raw`, then training on the normalized data.
ModelBundle fit_bundle(const Dataset& raw, const TrainingConfig& config,
                       windowing::NormalizationScope scope = windowing::NormalizationScope::Global);

/// Rates a level from its raw feature sequence. Throws MissingModality when
/// the executor supplied none.
class ModelRater : public control::Rater {
public:
  explicit ModelRater(ModelBundle bundle) : bundle_(std::move(bundle)) {}
  control::Rating rate(const control::RatingContext& context) override;
  control::RatingSource source() const override { return control::RatingSource::Model; }
  std::size_t invocations() const { return invocations_; }

private:
  ModelBundle bundle_;
  std::size_t invocations_ = 0;
};

}  // namespace cogload::model
