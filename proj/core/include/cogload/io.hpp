#pragma once

#include "cogload/types.hpp"

#include <iosfwd>
#include <string>

namespace cogload::io {

/// Gaze CSV: `t,dlx,dly,dlz,drx,dry,drz,pl,pr,ol,or,conv,valid_l,valid_r`.
GazeSeries read_gaze_csv(std::istream& in);
GazeSeries read_gaze_csv(const std::string& path);
void write_gaze_csv(std::ostream& out, const GazeSeries& series);

/// Physio CSV: `t,ppg,gsr`; an empty gsr field is a missing sample.
PhysioSeries read_physio_csv(std::istream& in);
PhysioSeries read_physio_csv(const std::string& path);
void write_physio_csv(std::ostream& out, const PhysioSeries& series);

/// One JSON object per line:
/// `{"participant_id","level_id","condition":{"control","task"},"label","windows":[[28]x4]}`.
std::string sequence_to_json_line(const FeatureSequence& seq);
FeatureSequence sequence_from_json_line(const std::string& line);

Dataset read_features_jsonl(std::istream& in);
Dataset read_features_jsonl(const std::string& path);
void write_features_jsonl(std::ostream& out, const Dataset& data);
void write_features_jsonl(const std::string& path, const Dataset& data);

}  // namespace cogload::io
