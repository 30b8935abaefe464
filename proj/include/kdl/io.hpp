#ifndef KDL_IO_HPP
#define KDL_IO_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chain.hpp"
#include "curves.hpp"
#include "mapspec.hpp"
#include "pipeline.hpp"

namespace kdl::io {

using njson = nlohmann::json;

/// Shortest round-trip decimal for a double: parsing the string recovers the
/// exact bit pattern, so JSON and CSV files diff byte-exactly across runs.
inline std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------- chains ---

inline njson to_json(const PLChain& c) {
    njson simplices = njson::array();
    for (const auto& [key, pts] : c.simplices) {
        njson simplex = njson::array();
        for (const Vec& p : pts) simplex.push_back(p);
        simplices.push_back(simplex);
    }
    return njson{{"dim", c.dim}, {"scale", c.scale()}, {"simplices", simplices}};
}

inline PLChain plchain_from_json(const njson& j) {
    if (!j.contains("dim") || !j.contains("simplices"))
        throw ConfigError("PLChain: need fields dim and simplices");
    PLChain c = PLChain::make(j.at("dim").get<int>(), j.value("scale", 1.0));
    for (const njson& simplex : j.at("simplices")) {
        std::vector<Vec> pts;
        for (const njson& p : simplex) pts.push_back(p.get<Vec>());
        c.toggle(pts);
    }
    return c;
}

inline const char* lattice_name(LatticeTag t) {
    return t == LatticeTag::primal ? "primal" : "dual";
}

inline njson to_json(const CubicalChain& c) {
    njson faces = njson::array();
    for (const Face& f : c.faces)
        faces.push_back(njson{{"anchor", f.anchor},
                              {"axes", f.axes},
                              {"lattice", lattice_name(f.lattice)}});
    return njson{{"scale", c.scale}, {"faces", faces}};
}

inline CubicalChain cubical_from_json(const njson& j) {
    if (!j.contains("scale") || !j.contains("faces"))
        throw ConfigError("CubicalChain: need fields scale and faces");
    CubicalChain c;
    c.scale = j.at("scale").get<double>();
    for (const njson& fj : j.at("faces")) {
        Face f;
        f.scale = c.scale;
        f.anchor = fj.at("anchor").get<std::vector<long long>>();
        f.axes = fj.at("axes").get<std::vector<int>>();
        std::string tag = fj.value("lattice", "primal");
        if (tag != "primal" && tag != "dual")
            throw ConfigError("CubicalChain: lattice must be primal or dual");
        f.lattice = tag == "primal" ? LatticeTag::primal : LatticeTag::dual;
        c.toggle(f);
    }
    return c;
}

inline njson to_json(const PolyCurve& c) {
    njson verts = njson::array();
    for (const Vec& v : c.vertices) verts.push_back(v);
    return njson{{"vertices", verts}};
}

inline PolyCurve curve_from_json(const njson& j) {
    if (!j.contains("vertices")) throw ConfigError("PolyCurve: need field vertices");
    PolyCurve c;
    for (const njson& v : j.at("vertices")) c.vertices.push_back(v.get<Vec>());
    return c;
}

// ------------------------------------------------------------------ maps ---

inline const char* chart_kind_name(ChartDesc::Kind k) {
    switch (k) {
        case ChartDesc::Kind::rectangle: return "rectangle";
        case ChartDesc::Kind::sphere: return "sphere";
        case ChartDesc::Kind::sphere_product: return "sphere_product";
        case ChartDesc::Kind::tube: return "tube";
        case ChartDesc::Kind::euclidean: return "euclidean";
        case ChartDesc::Kind::ball: return "ball";
    }
    return "unknown";
}

inline njson to_json(const ChartDesc& c) {
    return njson{{"kind", chart_kind_name(c.kind)},
                 {"sides", c.sides},
                 {"d1", c.d1},
                 {"d2", c.d2},
                 {"radius", c.radius}};
}

inline njson to_json(const MapSpec& m) {
    njson loci = njson::array();
    for (const auto& l : m.nonsmooth_loci) loci.push_back(l.name);
    njson j{{"kind", m.kind},
            {"params", m.params},
            {"domain", to_json(m.domain)},
            {"target", to_json(m.target)},
            {"nonsmooth_loci", loci}};
    if (m.lipschitz_bound) j["lipschitz_bound"] = *m.lipschitz_bound;
    return j;
}

inline njson to_json(const DilationEstimate& e, const std::string& map_id,
                     std::uint64_t seed) {
    return njson{{"map_id", map_id},
                 {"k", e.k},
                 {"value", e.value},
                 {"argmax", e.argmax_point},
                 {"samples", e.sample_count},
                 {"seed", seed}};
}

// -------------------------------------------------------------- pipeline ---

inline njson to_json(const PipelineConfig& c) {
    return njson{{"s_0", c.s0}, {"beta", c.beta}, {"tau", c.tau},
                 {"budget", c.budget}, {"seed", c.seed}};
}

inline PipelineConfig pipeline_config_from_json(const njson& j) {
    PipelineConfig c;
    c.s0 = j.value("s_0", c.s0);
    c.beta = j.value("beta", c.beta);
    c.tau = j.value("tau", c.tau);
    c.budget = j.value("budget", c.budget);
    c.seed = j.value("seed", c.seed);
    return c;
}

inline njson to_json(const PipelineReport& r) {
    njson scales = njson::array();
    for (const ScaleReport& s : r.scales)
        scales.push_back(njson{{"index", s.index},
                               {"scale", s.scale},
                               {"cycle_faces", s.cycle_faces},
                               {"thickness", s.thickness},
                               {"neighborhood", s.neighborhood}});
    return njson{{"beta", r.beta},
                 {"vol_y", r.vol_y},
                 {"vol_yc", r.vol_yc},
                 {"vol_ratio", r.vol_ratio},
                 {"hc_bound", r.hc_bound},
                 {"radius", r.radius},
                 {"scale_constant", r.scale_constant},
                 {"i_final", r.i_final},
                 {"boundary_exact", r.boundary_exact},
                 {"jitter_attempts", r.jitter_attempts},
                 {"grid_variables", r.grid_stats.variables},
                 {"grid_bad_sets", r.grid_stats.bad_sets},
                 {"grid_resample_rounds", r.grid_stats.resample_rounds},
                 {"scales", scales}};
}

// ------------------------------------------------------------------- CSV ---

/// RFC-4180 CSV builder: '.' decimal via fmt_double, LF line endings, fields
/// quoted only when they contain a comma, quote, or newline.
class Csv {
  public:
    explicit Csv(std::vector<std::string> columns) : ncols_(columns.size()) {
        append_row(columns);
    }

    std::size_t columns() const { return ncols_; }
    std::size_t rows() const { return nrows_; }

    void add_row(const std::vector<std::string>& fields) {
        if (fields.size() != ncols_) throw ConfigError("Csv: wrong field count");
        append_row(fields);
        ++nrows_;
    }

    const std::string& str() const { return body_; }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ConfigError("Csv: cannot open " + path);
        f << body_;
    }

  private:
    void append_row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) body_ += ',';
            body_ += escape(fields[i]);
        }
        body_ += '\n';
    }

    static std::string escape(const std::string& s) {
        if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        out += '"';
        return out;
    }

    std::size_t ncols_ = 0;
    std::size_t nrows_ = 0;
    std::string body_;
};

/// Parse an RFC-4180 CSV document into rows of fields (header included).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, had_any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(field);
            field.clear();
            had_any = true;
        } else if (c == '\n') {
            if (had_any || !field.empty()) {
                row.push_back(field);
                rows.push_back(row);
            }
            row.clear();
            field.clear();
            had_any = false;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (had_any || !field.empty()) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

// ----------------------------------------------------------------- files ---

inline njson read_json_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open " + path);
    njson j;
    try {
        f >> j;
    } catch (const njson::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return j;
}

inline void write_json_file(const std::string& path, const njson& j) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open " + path);
    f << j.dump(2) << '\n';
}

}  // namespace kdl::io

#endif  // KDL_IO_HPP
