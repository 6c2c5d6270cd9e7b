/**
 * @file gaze_io.hpp
 * @brief Text formats: gaze CSV (read/write), fixation CSV (read/write) and
 * density CSV (write).
 *
 * Gaze CSV:
 *
 *     #subject_id=s01
 *     #skill=pro
 *     #rate_hz=30
 *     #screen_w=1920
 *     #screen_h=1080
 *     t_ms,x_px,y_px,valid
 *     0,100,200,1
 *     33.333333333333336,nan,nan,0
 *
 * Numbers are written in shortest round-trip form, so parse(write(r)) == r.
 */
#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "gazeskill/density.hpp"
#include "gazeskill/error.hpp"
#include "gazeskill/types.hpp"

namespace gazeskill {

inline constexpr std::string_view kGazeHeader = "t_ms,x_px,y_px,valid";
inline constexpr std::string_view kFixationHeader = "onset_ms,offset_ms,duration_ms,cx_px,cy_px,dispersion_px,n_samples,class";

enum class HeaderPolicy { Strict, Lenient };

struct GazeParseResult {
    GazeRecording recording;
    std::size_t rows_in = 0;
    std::size_t rows_dropped = 0;
};

/// Shortest text that parses back to the same double. NaN is written as `nan`.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

/// `#key=value` metadata lines preceding a CSV header.
struct MetadataReader {
    std::vector<std::pair<std::string, std::string>> entries;

    static bool is_metadata(const std::string& line) { return !line.empty() && line.front() == '#'; }

    void add(const std::string& line, std::size_t line_no) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(Errc::MalformedRow, "metadata line without '='", line_no);
        entries.emplace_back(line.substr(1, eq - 1), line.substr(eq + 1));
    }
};

}  // namespace detail

/// Parses a gaze CSV. Strict mode throws on the first bad row; lenient mode
/// drops malformed and non-monotone rows and counts them.
inline GazeParseResult parse_gaze_csv(std::istream& in, HeaderPolicy policy = HeaderPolicy::Strict) {
    GazeParseResult result;
    GazeRecording& rec = result.recording;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    detail::MetadataReader meta;

    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::MetadataReader::is_metadata(line)) {
            meta.add(line, line_no);
            continue;
        }
        if (line.empty()) continue;
        if (line != kGazeHeader) throw Error(Errc::MissingHeader, "expected header '" + std::string(kGazeHeader) + "'", line_no);
        have_header = true;
        break;
    }
    if (!have_header) throw Error(Errc::MissingHeader, "no header line found");

    for (auto& [key, value] : meta.entries) {
        bool ok = true;
        if (key == "subject_id") {
            rec.subject_id = value;
        } else if (key == "skill") {
            const auto s = parse_skill(value);
            ok = s.has_value();
            rec.skill_label = s;
        } else if (key == "rate_hz") {
            ok = detail::parse_double(value, rec.nominal_rate_hz) && rec.nominal_rate_hz > 0.0 && std::isfinite(rec.nominal_rate_hz);
        } else if (key == "screen_w") {
            ok = detail::parse_int(value, rec.screen_w_px) && rec.screen_w_px > 0;
        } else if (key == "screen_h") {
            ok = detail::parse_int(value, rec.screen_h_px) && rec.screen_h_px > 0;
        } else {
            rec.extra_metadata.emplace_back(key, value);
        }
        if (!ok) throw Error(Errc::MalformedRow, "bad metadata value for '" + key + "'");
    }

    std::size_t valid_rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        ++result.rows_in;
        const auto fields = detail::split_commas(line);
        GazeSample s;
        bool ok = fields.size() == 4 && detail::parse_double(fields[0], s.t_ms) && detail::parse_double(fields[1], s.x_px) &&
                  detail::parse_double(fields[2], s.y_px) && (fields[3] == "0" || fields[3] == "1");
        if (ok) {
            s.valid = fields[3] == "1";
            ok = std::isfinite(s.t_ms) && s.t_ms >= 0.0 && (!s.valid || (std::isfinite(s.x_px) && std::isfinite(s.y_px)));
        }
        if (!ok) {
            if (policy == HeaderPolicy::Strict) throw Error(Errc::MalformedRow, "cannot parse row '" + line + "'", line_no);
            ++result.rows_dropped;
            continue;
        }
        if (!rec.samples.empty() && !(s.t_ms > rec.samples.back().t_ms)) {
            if (policy == HeaderPolicy::Strict)
                throw Error(Errc::NonMonotoneTimestamp, "timestamp does not increase", line_no);
            ++result.rows_dropped;
            continue;
        }
        if (s.valid) ++valid_rows;
        rec.samples.push_back(s);
    }
    if (valid_rows == 0) throw Error(Errc::EmptyRecording, "no valid rows");
    return result;
}

inline GazeParseResult parse_gaze_csv(std::string_view text, HeaderPolicy policy = HeaderPolicy::Strict) {
    std::istringstream in{std::string(text)};
    return parse_gaze_csv(in, policy);
}

inline void write_gaze_csv(std::ostream& out, const GazeRecording& rec) {
    out << "#subject_id=" << rec.subject_id << '\n';
    if (rec.skill_label) out << "#skill=" << to_string(*rec.skill_label) << '\n';
    out << "#rate_hz=" << format_number(rec.nominal_rate_hz) << '\n';
    out << "#screen_w=" << rec.screen_w_px << '\n';
    out << "#screen_h=" << rec.screen_h_px << '\n';
    for (const auto& [k, v] : rec.extra_metadata) out << '#' << k << '=' << v << '\n';
    out << kGazeHeader << '\n';
    for (const auto& s : rec.samples)
        out << format_number(s.t_ms) << ',' << format_number(s.x_px) << ',' << format_number(s.y_px) << ','
            << (s.valid ? '1' : '0') << '\n';
}

inline std::string write_gaze_csv(const GazeRecording& rec) {
    std::ostringstream out;
    write_gaze_csv(out, rec);
    return out.str();
}

/// Metadata carried along with a fixation list so analysis can group sessions.
struct FixationFileMeta {
    std::string subject_id;
    std::optional<SkillLevel> skill_label;
};

inline void write_fixation_csv(std::ostream& out, const std::vector<Fixation>& fixations,
                               const FixationFileMeta& meta = {}, const ClassBands& bands = {}) {
    if (!meta.subject_id.empty()) out << "#subject_id=" << meta.subject_id << '\n';
    if (meta.skill_label) out << "#skill=" << to_string(*meta.skill_label) << '\n';
    out << kFixationHeader << '\n';
    for (const auto& f : fixations)
        out << format_number(f.onset_ms) << ',' << format_number(f.offset_ms) << ',' << format_number(f.duration_ms) << ','
            << format_number(f.cx_px) << ',' << format_number(f.cy_px) << ',' << format_number(f.dispersion_px) << ','
            << f.n_samples << ',' << to_string(classify_fixation(f.duration_ms, bands)) << '\n';
}

inline std::string write_fixation_csv(const std::vector<Fixation>& fixations, const FixationFileMeta& meta = {},
                                      const ClassBands& bands = {}) {
    std::ostringstream out;
    write_fixation_csv(out, fixations, meta, bands);
    return out.str();
}

/// Two-column `t_ms,density` export of a KDE.
inline std::string write_density_csv(const DensityEstimate& est) {
    std::string out = "t_ms,density\n";
    for (std::size_t i = 0; i < est.grid_ms.size(); ++i)
        out += format_number(est.grid_ms[i]) + ',' + format_number(est.density[i]) + '\n';
    return out;
}

struct FixationFile {
    FixationFileMeta meta;
    std::vector<Fixation> fixations;
};

inline FixationFile read_fixation_csv(std::istream& in) {
    FixationFile file;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    detail::MetadataReader meta;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::MetadataReader::is_metadata(line)) {
            meta.add(line, line_no);
            continue;
        }
        if (line.empty()) continue;
        if (line != kFixationHeader) throw Error(Errc::MissingHeader, "expected fixation header", line_no);
        have_header = true;
        break;
    }
    if (!have_header) throw Error(Errc::MissingHeader, "no fixation header line found");
    for (const auto& [key, value] : meta.entries) {
        if (key == "subject_id") file.meta.subject_id = value;
        if (key == "skill") {
            file.meta.skill_label = parse_skill(value);
            if (!file.meta.skill_label) throw Error(Errc::MalformedRow, "bad skill label '" + value + "'");
        }
    }
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        const auto fields = detail::split_commas(line);
        Fixation f;
        const bool ok = fields.size() == 8 && detail::parse_double(fields[0], f.onset_ms) &&
                        detail::parse_double(fields[1], f.offset_ms) && detail::parse_double(fields[2], f.duration_ms) &&
                        detail::parse_double(fields[3], f.cx_px) && detail::parse_double(fields[4], f.cy_px) &&
                        detail::parse_double(fields[5], f.dispersion_px) && detail::parse_int(fields[6], f.n_samples) &&
                        f.duration_ms > 0.0 && std::isfinite(f.duration_ms);
        if (!ok) throw Error(Errc::MalformedRow, "cannot parse fixation row '" + line + "'", line_no);
        file.fixations.push_back(f);
    }
    return file;
}

inline FixationFile read_fixation_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    return read_fixation_csv(in);
}

}  // namespace gazeskill
