#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tptomo/calibration.hpp"
#include "tptomo/povm.hpp"

namespace tptomo {

struct MeasurementSet {
    std::vector<ClickRecord> records;
    std::vector<ProbeSetting> settings;
};

/// Parses a delimited measurement file (whitespace or comma separated, '#'
/// comments, one header line naming the columns). Required columns:
/// setting_id, pulses, no_clicks, and exactly one of probe_mean /
/// blocked_no_clicks. Optional: blocked_pulses, signal_only_pulses,
/// signal_only_no_clicks. Probe means are derived from blocked counts via the
/// scheme parameters when not given directly.
MeasurementSet ingest_measurements(const std::string& path, const SchemeParams& params);

enum class ProbeColumn { Mean, BlockedCounts };

/// Writes records in the format ingest_measurements reads back.
void emit_measurements(const std::string& path, const MeasurementSet& data,
                       ProbeColumn probe_column = ProbeColumn::Mean);

/// FNV-1a over the file bytes; reports embed this for every input.
std::uint64_t file_content_hash(const std::string& path);

/// Round to 12 significant digits, the report serialization precision.
double report_round(double v);

}  // namespace tptomo
