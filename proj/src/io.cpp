#include "tptomo/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tptomo/errors.hpp"

namespace tptomo {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::string cleaned = line;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream ss(cleaned);
    std::vector<std::string> fields;
    std::string f;
    while (ss >> f) fields.push_back(f);
    return fields;
}

[[noreturn]] void parse_fail(const std::string& path, int line_no, const std::string& msg) {
    throw DataError(path + ":" + std::to_string(line_no) + ": " + msg);
}

}  // namespace

MeasurementSet ingest_measurements(const std::string& path, const SchemeParams& params) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open measurement file '" + path + "'");

    std::vector<std::string> header;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto stripped = line.substr(0, line.find('#'));
        header = split_fields(stripped);
        if (!header.empty()) break;
    }
    if (header.empty()) throw DataError(path + ": empty file, no header");

    auto col = [&](const std::string& name) -> int {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int c_id = col("setting_id");
    const int c_mean = col("probe_mean");
    const int c_blocked = col("blocked_no_clicks");
    const int c_blocked_pulses = col("blocked_pulses");
    const int c_pulses = col("pulses");
    const int c_clicks = col("no_clicks");
    const int c_so_pulses = col("signal_only_pulses");
    const int c_so_clicks = col("signal_only_no_clicks");

    if (c_id < 0 || c_pulses < 0 || c_clicks < 0)
        throw DataError(path + ": header must name setting_id, pulses, no_clicks");
    if ((c_mean >= 0) == (c_blocked >= 0))
        throw DataError(path + ": exactly one of probe_mean / blocked_no_clicks must be present");

    MeasurementSet out;
    while (std::getline(in, line)) {
        ++line_no;
        const auto stripped = line.substr(0, line.find('#'));
        const auto fields = split_fields(stripped);
        if (fields.empty()) continue;
        if (fields.size() != header.size())
            parse_fail(path, line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                          std::to_string(fields.size()));

        auto as_int = [&](int c) -> std::int64_t {
            try {
                std::size_t pos = 0;
                const std::int64_t v = std::stoll(fields[c], &pos);
                if (pos != fields[c].size()) throw std::invalid_argument("");
                return v;
            } catch (const std::exception&) {
                parse_fail(path, line_no, "bad integer in column '" + header[c] + "'");
            }
        };
        auto as_real = [&](int c) -> double {
            try {
                std::size_t pos = 0;
                const double v = std::stod(fields[c], &pos);
                if (pos != fields[c].size()) throw std::invalid_argument("");
                return v;
            } catch (const std::exception&) {
                parse_fail(path, line_no, "bad number in column '" + header[c] + "'");
            }
        };

        ClickRecord rec;
        rec.setting_id = static_cast<int>(as_int(c_id));
        rec.pulses = as_int(c_pulses);
        rec.no_clicks = as_int(c_clicks);
        if (c_blocked >= 0) rec.blocked_no_clicks = as_int(c_blocked);
        if (c_blocked_pulses >= 0) rec.blocked_pulses = as_int(c_blocked_pulses);
        if (c_so_pulses >= 0) rec.signal_only_pulses = as_int(c_so_pulses);
        if (c_so_clicks >= 0) rec.signal_only_no_clicks = as_int(c_so_clicks);
        try {
            rec.validate();
        } catch (const DataError& e) {
            parse_fail(path, line_no, e.what());
        }

        ProbeSetting setting;
        setting.id = rec.setting_id;
        if (c_mean >= 0) {
            setting.mean = as_real(c_mean);
            if (setting.mean < 0.0) parse_fail(path, line_no, "negative probe mean");
        } else {
            try {
                setting.mean = probe_mean_from_blocked(params, *rec.blocked_no_clicks,
                                                       rec.blocked_pulses.value_or(rec.pulses));
            } catch (const DataError& e) {
                parse_fail(path, line_no, e.what());
            }
        }
        out.records.push_back(rec);
        out.settings.push_back(setting);
    }
    if (out.records.empty()) throw DataError(path + ": no settings");
    return out;
}

void emit_measurements(const std::string& path, const MeasurementSet& data,
                       ProbeColumn probe_column) {
    if (data.records.size() != data.settings.size())
        throw DataError("emit_measurements: record/setting count mismatch");
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");

    const bool has_so = !data.records.empty() && data.records.front().signal_only_no_clicks &&
                        data.records.front().signal_only_pulses;
    out << "setting_id ";
    out << (probe_column == ProbeColumn::Mean ? "probe_mean" : "blocked_no_clicks blocked_pulses");
    out << " pulses no_clicks";
    if (has_so) out << " signal_only_pulses signal_only_no_clicks";
    out << "\n";

    out.precision(15);
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto& rec = data.records[i];
        out << rec.setting_id << ' ';
        if (probe_column == ProbeColumn::Mean) {
            out << data.settings[i].mean;
        } else {
            if (!rec.blocked_no_clicks)
                throw DataError("emit_measurements: record lacks blocked counts");
            out << *rec.blocked_no_clicks << ' ' << rec.blocked_pulses.value_or(rec.pulses);
        }
        out << ' ' << rec.pulses << ' ' << rec.no_clicks;
        if (has_so) out << ' ' << *rec.signal_only_pulses << ' ' << *rec.signal_only_no_clicks;
        out << '\n';
    }
}

std::uint64_t file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for hashing");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

double report_round(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::strtod(buf, nullptr);
}

}  // namespace tptomo
