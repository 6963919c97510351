#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "levyflow/core.hpp"
#include "levyflow/sampling.hpp"

namespace levyflow {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(std::string s) {
    auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && issp(s.front())) s.erase(s.begin());
    while (!s.empty() && issp(s.back())) s.pop_back();
    return s;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline double parse_double(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError(context + ": cannot parse number '" + s + "'");
    }
}

}  // namespace detail

/// Loads observed concentrations from a CSV with header
/// `time,x,concentration[,weight]`, grouped by time. The optional weight must
/// be constant within a time group; default weight is 1.
inline ObservationSet load_observations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_observations: cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    bool has_weight = false;
    std::map<double, ObservationSet::Group> by_time;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto fields = detail::split(t, ',');
        if (!header_seen) {
            if (fields.size() < 3 || fields[0] != "time" || fields[1] != "x" ||
                fields[2] != "concentration")
                throw ParseError("load_observations: line " + std::to_string(line_no) +
                                 ": expected header time,x,concentration[,weight]");
            has_weight = fields.size() == 4 && fields[3] == "weight";
            if (fields.size() > 4 || (fields.size() == 4 && !has_weight))
                throw ParseError("load_observations: line " + std::to_string(line_no) +
                                 ": unexpected header columns");
            header_seen = true;
            continue;
        }
        const std::string ctx = "load_observations: line " + std::to_string(line_no);
        if (fields.size() != (has_weight ? 4u : 3u)) throw ParseError(ctx + ": wrong field count");
        const double time = detail::parse_double(fields[0], ctx);
        const double x = detail::parse_double(fields[1], ctx);
        const double c = detail::parse_double(fields[2], ctx);
        const double w = has_weight ? detail::parse_double(fields[3], ctx) : 1.0;
        if (c < 0.0) throw ParseError(ctx + ": negative concentration");
        if (!(w > 0.0)) throw ParseError(ctx + ": weight must be positive");
        auto [it, inserted] = by_time.try_emplace(time, ObservationSet::Group{time, w, {}});
        if (!inserted && it->second.weight != w)
            throw ParseError(ctx + ": weight differs within time group");
        for (const auto& pt : it->second.points)
            if (pt.x == x)
                throw ParseError(ctx + ": duplicate (time, x) observation");
        it->second.points.push_back({x, c});
    }
    if (!header_seen) throw ParseError("load_observations: no observations in " + path.string());
    ObservationSet set;
    for (auto& [time, group] : by_time) set.groups.push_back(std::move(group));
    if (set.groups.empty() || set.total_points() == 0)
        throw ParseError("load_observations: no observations in " + path.string());
    return set;
}

inline void write_observations(const ObservationSet& set, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("write_observations: cannot open " + path.string());
    out << std::setprecision(17);
    out << "time,x,concentration,weight\n";
    for (const auto& g : set.groups)
        for (const auto& pt : g.points)
            out << g.time << ',' << pt.x << ',' << pt.c << ',' << g.weight << '\n';
}

/// Mass constant from one time group: trapezoid integral of the observed
/// concentration over its x-range, extended with zero concentration at the
/// domain endpoints. The density scale is then p_hat = c / K.
inline double estimate_mass_constant(const ObservationSet::Group& group, double x_left,
                                     double x_right) {
    if (group.points.size() < 2)
        throw std::invalid_argument("estimate_mass_constant: need at least two points");
    std::vector<ObservationSet::Point> pts = group.points;
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
    if (pts.front().x < x_left || pts.back().x > x_right)
        throw std::invalid_argument("estimate_mass_constant: observations outside domain");
    std::vector<ObservationSet::Point> ext;
    if (pts.front().x > x_left) ext.push_back({x_left, 0.0});
    ext.insert(ext.end(), pts.begin(), pts.end());
    if (pts.back().x < x_right) ext.push_back({x_right, 0.0});
    double k = 0.0;
    for (std::size_t i = 0; i + 1 < ext.size(); ++i)
        k += 0.5 * (ext[i].c + ext[i + 1].c) * (ext[i + 1].x - ext[i].x);
    if (!(k > 0.0)) throw std::invalid_argument("estimate_mass_constant: zero total mass");
    return k;
}

/// Flat key = value configuration, `#` comments, optional [section] headers
/// which are ignored so the key namespace stays flat.
class RunConfig {
public:
    static RunConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("RunConfig: cannot open " + path.string());
        RunConfig cfg;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string t = detail::trim(line);
            if (t.empty() || t[0] == '#' || t[0] == ';') continue;
            if (t.front() == '[' && t.back() == ']') continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ParseError("RunConfig: line " + std::to_string(line_no) + ": expected key = value");
            const std::string key = detail::trim(t.substr(0, eq));
            const std::string value = detail::trim(t.substr(eq + 1));
            if (key.empty())
                throw ParseError("RunConfig: line " + std::to_string(line_no) + ": empty key");
            if (!cfg.values_.emplace(key, value).second)
                throw ParseError("RunConfig: line " + std::to_string(line_no) + ": duplicate key " + key);
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ParseError("RunConfig: missing key " + key);
        return it->second;
    }

    double get_double(const std::string& key) const {
        return detail::parse_double(get_string(key), "RunConfig key " + key);
    }

    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        try {
            return std::stoull(get_string(key));
        } catch (const std::exception&) {
            throw ParseError("RunConfig key " + key + ": cannot parse integer");
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = get_string(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ParseError("RunConfig key " + key + ": cannot parse boolean '" + v + "'");
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::vector<double> out;
        for (const auto& part : detail::split(get_string(key), ','))
            if (!part.empty()) out.push_back(detail::parse_double(part, "RunConfig key " + key));
        return out;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// FNV-1a hash of the canonical parameter rendering; stamped into sample CSV
/// headers so batches are traceable to the parameters that produced them.
inline std::uint64_t params_hash(const FadeParams& p) {
    std::ostringstream os;
    os << std::setprecision(17) << p.lambda << '|' << p.gamma << '|' << p.b << '|' << p.drift.a0
       << '|' << p.drift.a1 << '|' << p.drift.a2 << '|' << p.drift.a3 << '|' << p.drift.x_mid
       << '|' << p.x_left << '|' << p.x_right << '|' << p.mass_constant;
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : os.str()) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

inline void write_sample_csv(const SampleBatch& batch, const FadeParams& params,
                             const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("write_sample_csv: cannot open " + path.string());
    out << "# seed=" << batch.seed << " time=" << std::setprecision(17) << batch.time
        << " params_hash=" << std::hex << params_hash(params) << std::dec << '\n';
    out << "y\n" << std::setprecision(17);
    for (double v : batch.values) out << v << '\n';
}

inline SampleBatch load_sample_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_sample_csv: cannot open " + path.string());
    SampleBatch batch;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            std::istringstream is(t.substr(1));
            std::string token;
            while (is >> token) {
                if (token.rfind("seed=", 0) == 0) batch.seed = std::stoull(token.substr(5));
                if (token.rfind("time=", 0) == 0) batch.time = std::stod(token.substr(5));
            }
            continue;
        }
        if (!header_seen) {
            if (t != "y")
                throw ParseError("load_sample_csv: line " + std::to_string(line_no) +
                                 ": expected column header 'y'");
            header_seen = true;
            continue;
        }
        batch.values.push_back(detail::parse_double(t, "load_sample_csv: line " + std::to_string(line_no)));
    }
    if (batch.values.empty()) throw ParseError("load_sample_csv: empty batch in " + path.string());
    return batch;
}

}  // namespace levyflow
