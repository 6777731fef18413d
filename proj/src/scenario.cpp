#include "coldplasma/scenario.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace coldplasma {

using nlohmann::json;

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------- manifest

const char* scenario_names[] = {"affine-run", "phase",       "corrector",
                                "sigma0",     "field-run",   "euler-analog",
                                "sweep",      "check-condition", "figures"};

ScenarioKind scenario_from_string(const std::string& s) {
    for (std::size_t i = 0; i < std::size(scenario_names); ++i) {
        if (s == scenario_names[i]) return static_cast<ScenarioKind>(i);
    }
    throw ManifestError("scenario: unknown kind '" + s + "'");
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ManifestError(path + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ManifestError(path + "." + key + ": unknown field");
    }
}

double get_num(const json& j, const std::string& path, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ManifestError(path + "." + key + ": expected a number");
    return j[key].get<double>();
}

std::size_t get_size(const json& j, const std::string& path, const char* key,
                     std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_unsigned()) {
        throw ManifestError(path + "." + key + ": expected a nonnegative integer");
    }
    return j[key].get<std::size_t>();
}

int get_int(const json& j, const std::string& path, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) throw ManifestError(path + "." + key + ": expected an integer");
    return j[key].get<int>();
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ManifestError(path + "." + key + ": expected a boolean");
    return j[key].get<bool>();
}

std::string get_str(const json& j, const std::string& path, const char* key,
                    const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) throw ManifestError(path + "." + key + ": expected a string");
    return j[key].get<std::string>();
}

std::vector<double> get_list(const json& j, const std::string& path, const char* key) {
    std::vector<double> out;
    if (!j.contains(key)) return out;
    if (!j[key].is_array()) throw ManifestError(path + "." + key + ": expected an array");
    for (const auto& v : j[key]) {
        if (!v.is_number()) throw ManifestError(path + "." + key + ": expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

json damping_to_json(const DampingConfig& c) {
    return json{{"kind", c.kind}, {"nu0", c.nu0}, {"gamma", c.gamma}, {"epsilon", c.epsilon}};
}

json data_to_json(const DataConfig& c) {
    return json{{"kind", c.kind},       {"d", c.d},
                {"dv", c.dv},           {"e_offset", c.e_offset},
                {"L", c.L},             {"mode", c.mode},
                {"table_path", c.table_path},
                {"a0", c.a0},           {"b0", c.b0},
                {"A0", c.A0},           {"B0", c.B0}};
}

json manifest_to_json(const Manifest& m) {
    json j;
    j["scenario"] = to_string(m.kind);
    j["name"] = m.name;
    j["output_dir"] = m.output_dir;
    j["damping"] = damping_to_json(m.damping);
    j["affine"] = json{{"a0", m.affine.a0},       {"b0", m.affine.b0},
                       {"A0", m.affine.A0},       {"B0", m.affine.B0},
                       {"t_end", m.affine.t_end}, {"tol", m.affine.tol},
                       {"paper_sign", m.affine.paper_sign}};
    j["field"] = json{{"data", data_to_json(m.field.data)},
                      {"N", m.field.N},
                      {"t_end", m.field.t_end},
                      {"tol", m.field.tol},
                      {"snapshot_dt", m.field.snapshot_dt},
                      {"theta_blow", m.field.theta_blow},
                      {"crossing_delta_rel", m.field.crossing_delta_rel},
                      {"h_min", m.field.h_min},
                      {"force_zero_sigma", m.field.force_zero_sigma}};
    j["corrector"] = json{{"C", m.corrector.C},
                          {"b0", m.corrector.b0},
                          {"b_min", m.corrector.b_min},
                          {"points", m.corrector.points}};
    j["sigma0"] = json{{"C", m.sigma0.C},           {"sigma0", m.sigma0.sigma0},
                       {"xi0", m.sigma0.xi0},       {"s_start", m.sigma0.s_start},
                       {"s_end", m.sigma0.s_end},   {"branch", m.sigma0.branch},
                       {"samples", m.sigma0.samples}, {"tol", m.sigma0.tol}};
    j["sweep"] = json{{"gamma_list", m.sweep.gamma_list},
                      {"epsilon_list", m.sweep.epsilon_list},
                      {"d_list", m.sweep.d_list},
                      {"N", m.sweep.N},
                      {"t_end", m.sweep.t_end},
                      {"tol", m.sweep.tol},
                      {"crossing_delta_rel", m.sweep.crossing_delta_rel},
                      {"workers", m.sweep.workers}};
    j["figures"] = json{{"epsilon", m.figures.epsilon},
                        {"a0", m.figures.a0},
                        {"b0", m.figures.b0}};
    return j;
}

// ---------------------------------------------------------------- csv

class CsvFile {
public:
    CsvFile(const std::filesystem::path& path, const std::string& manifest_hash,
            const std::string& header)
        : out_(path) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path.string());
        out_ << "# manifest-hash: " << manifest_hash << "\n" << header << "\n";
    }

    void row(std::initializer_list<double> values) {
        bool first = true;
        for (double v : values) {
            if (!first) out_ << ',';
            out_ << g17(v);
            first = false;
        }
        out_ << '\n';
    }

    void raw_row(const std::string& line) { out_ << line << '\n'; }

private:
    std::ofstream out_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << text;
}

}  // namespace

// ---------------------------------------------------------------- configs

std::string to_string(ScenarioKind kind) {
    return scenario_names[static_cast<std::size_t>(kind)];
}

DampingSpec DampingConfig::build() const {
    if (kind != "power-law") {
        throw ManifestError("damping.kind: only 'power-law' is serializable (got '" + kind +
                            "')");
    }
    return DampingSpec::power_law(epsilon, nu0, gamma);
}

InitialData DataConfig::build() const {
    if (kind == "zero-velocity-sine") return InitialData::sine(d, e_offset, L);
    if (kind == "velocity-sine") return InitialData::velocity_sine(dv, d, e_offset, L);
    if (kind == "affine") return InitialData::affine(a0, b0, A0, B0, L);
    if (kind == "custom-table") {
        std::ifstream in(table_path);
        if (!in) throw ManifestError("field.data.table_path: cannot open '" + table_path + "'");
        std::vector<double> xs, Vs, Es, Vxs, Exs;
        std::string line;
        bool header_seen = false;
        std::size_t ncol = 0;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            if (!header_seen) {
                header_seen = true;  // x,V,E[,Vx,Ex]
                ncol = 1 + static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
                continue;
            }
            std::istringstream ss(line);
            std::string cell;
            std::vector<double> vals;
            while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
            if (vals.size() != ncol) {
                throw ManifestError("field.data.table_path: ragged row in table");
            }
            xs.push_back(vals[0]);
            Vs.push_back(vals[1]);
            Es.push_back(vals[2]);
            if (ncol >= 5) {
                Vxs.push_back(vals[3]);
                Exs.push_back(vals[4]);
            }
        }
        const DomainMode m = (mode == "clamped") ? DomainMode::Clamped : DomainMode::Periodic;
        return InitialData::from_table(std::move(xs), std::move(Vs), std::move(Es),
                                       std::move(Vxs), std::move(Exs), L, m);
    }
    throw ManifestError("field.data.kind: unknown kind '" + kind + "'");
}

FieldOptions FieldConfig::options() const {
    FieldOptions o;
    o.tol = tol;
    o.snapshot_dt = snapshot_dt;
    o.theta_blow = theta_blow;
    o.crossing_delta_rel = crossing_delta_rel;
    o.h_min = h_min;
    o.force_zero_sigma = force_zero_sigma;
    return o;
}

// ---------------------------------------------------------------- manifest

Manifest Manifest::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ManifestError(std::string("manifest: invalid JSON: ") + e.what());
    }
    check_keys(j, "manifest",
               {"scenario", "name", "output_dir", "damping", "affine", "field", "corrector",
                "sigma0", "sweep", "figures"});

    Manifest m;
    if (!j.contains("scenario")) throw ManifestError("scenario: required field is missing");
    m.kind = scenario_from_string(get_str(j, "manifest", "scenario", ""));
    m.name = get_str(j, "manifest", "name", m.name);
    m.output_dir = get_str(j, "manifest", "output_dir", m.output_dir);

    if (j.contains("damping")) {
        const json& d = j["damping"];
        check_keys(d, "damping", {"kind", "nu0", "gamma", "epsilon"});
        m.damping.kind = get_str(d, "damping", "kind", m.damping.kind);
        m.damping.nu0 = get_num(d, "damping", "nu0", m.damping.nu0);
        m.damping.gamma = get_num(d, "damping", "gamma", m.damping.gamma);
        m.damping.epsilon = get_num(d, "damping", "epsilon", m.damping.epsilon);
    }
    if (j.contains("affine")) {
        const json& a = j["affine"];
        check_keys(a, "affine", {"a0", "b0", "A0", "B0", "t_end", "tol", "paper_sign"});
        m.affine.a0 = get_num(a, "affine", "a0", m.affine.a0);
        m.affine.b0 = get_num(a, "affine", "b0", m.affine.b0);
        m.affine.A0 = get_num(a, "affine", "A0", m.affine.A0);
        m.affine.B0 = get_num(a, "affine", "B0", m.affine.B0);
        m.affine.t_end = get_num(a, "affine", "t_end", m.affine.t_end);
        m.affine.tol = get_num(a, "affine", "tol", m.affine.tol);
        m.affine.paper_sign = get_bool(a, "affine", "paper_sign", m.affine.paper_sign);
    }
    if (j.contains("field")) {
        const json& f = j["field"];
        check_keys(f, "field",
                   {"data", "N", "t_end", "tol", "snapshot_dt", "theta_blow",
                    "crossing_delta_rel", "h_min", "force_zero_sigma"});
        if (f.contains("data")) {
            const json& d = f["data"];
            check_keys(d, "field.data",
                       {"kind", "d", "dv", "e_offset", "L", "mode", "table_path", "a0", "b0",
                        "A0", "B0"});
            DataConfig& dc = m.field.data;
            dc.kind = get_str(d, "field.data", "kind", dc.kind);
            dc.d = get_num(d, "field.data", "d", dc.d);
            dc.dv = get_num(d, "field.data", "dv", dc.dv);
            dc.e_offset = get_num(d, "field.data", "e_offset", dc.e_offset);
            dc.L = get_num(d, "field.data", "L", dc.L);
            dc.mode = get_str(d, "field.data", "mode", dc.mode);
            dc.table_path = get_str(d, "field.data", "table_path", dc.table_path);
            dc.a0 = get_num(d, "field.data", "a0", dc.a0);
            dc.b0 = get_num(d, "field.data", "b0", dc.b0);
            dc.A0 = get_num(d, "field.data", "A0", dc.A0);
            dc.B0 = get_num(d, "field.data", "B0", dc.B0);
        }
        m.field.N = get_size(f, "field", "N", m.field.N);
        m.field.t_end = get_num(f, "field", "t_end", m.field.t_end);
        m.field.tol = get_num(f, "field", "tol", m.field.tol);
        m.field.snapshot_dt = get_num(f, "field", "snapshot_dt", m.field.snapshot_dt);
        m.field.theta_blow = get_num(f, "field", "theta_blow", m.field.theta_blow);
        m.field.crossing_delta_rel =
            get_num(f, "field", "crossing_delta_rel", m.field.crossing_delta_rel);
        m.field.h_min = get_num(f, "field", "h_min", m.field.h_min);
        m.field.force_zero_sigma =
            get_bool(f, "field", "force_zero_sigma", m.field.force_zero_sigma);
    }
    if (j.contains("corrector")) {
        const json& c = j["corrector"];
        check_keys(c, "corrector", {"C", "b0", "b_min", "points"});
        m.corrector.C = get_num(c, "corrector", "C", m.corrector.C);
        m.corrector.b0 = get_num(c, "corrector", "b0", m.corrector.b0);
        m.corrector.b_min = get_num(c, "corrector", "b_min", m.corrector.b_min);
        m.corrector.points = get_size(c, "corrector", "points", m.corrector.points);
    }
    if (j.contains("sigma0")) {
        const json& s = j["sigma0"];
        check_keys(s, "sigma0",
                   {"C", "sigma0", "xi0", "s_start", "s_end", "branch", "samples", "tol"});
        m.sigma0.C = get_num(s, "sigma0", "C", m.sigma0.C);
        m.sigma0.sigma0 = get_num(s, "sigma0", "sigma0", m.sigma0.sigma0);
        m.sigma0.xi0 = get_num(s, "sigma0", "xi0", m.sigma0.xi0);
        m.sigma0.s_start = get_num(s, "sigma0", "s_start", m.sigma0.s_start);
        m.sigma0.s_end = get_num(s, "sigma0", "s_end", m.sigma0.s_end);
        m.sigma0.branch = get_int(s, "sigma0", "branch", m.sigma0.branch);
        m.sigma0.samples = get_size(s, "sigma0", "samples", m.sigma0.samples);
        m.sigma0.tol = get_num(s, "sigma0", "tol", m.sigma0.tol);
    }
    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        check_keys(s, "sweep",
                   {"gamma_list", "epsilon_list", "d_list", "N", "t_end", "tol",
                    "crossing_delta_rel", "workers"});
        m.sweep.gamma_list = get_list(s, "sweep", "gamma_list");
        m.sweep.epsilon_list = get_list(s, "sweep", "epsilon_list");
        m.sweep.d_list = get_list(s, "sweep", "d_list");
        m.sweep.N = get_size(s, "sweep", "N", m.sweep.N);
        m.sweep.t_end = get_num(s, "sweep", "t_end", m.sweep.t_end);
        m.sweep.tol = get_num(s, "sweep", "tol", m.sweep.tol);
        m.sweep.crossing_delta_rel =
            get_num(s, "sweep", "crossing_delta_rel", m.sweep.crossing_delta_rel);
        m.sweep.workers = get_size(s, "sweep", "workers", m.sweep.workers);
    }
    if (j.contains("figures")) {
        const json& f = j["figures"];
        check_keys(f, "figures", {"epsilon", "a0", "b0"});
        m.figures.epsilon = get_num(f, "figures", "epsilon", m.figures.epsilon);
        m.figures.a0 = get_num(f, "figures", "a0", m.figures.a0);
        m.figures.b0 = get_num(f, "figures", "b0", m.figures.b0);
    }
    return m;
}

Manifest Manifest::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("manifest: cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string Manifest::canonical_json() const { return manifest_to_json(*this).dump(2) + "\n"; }

std::string Manifest::hash() const {
    const std::string text = manifest_to_json(*this).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void Manifest::validate() const {
    auto positive = [](double v, const char* field) {
        if (!(v > 0.0)) throw ManifestError(std::string(field) + ": must be positive");
    };
    auto tol_ok = [](double v, const char* field) {
        if (!(v > 0.0 && v <= 1e-3)) {
            throw ManifestError(std::string(field) + ": must lie in (0, 1e-3]");
        }
    };
    if (m_kind_needs_damping()) {
        if (damping.kind != "power-law") {
            throw ManifestError("damping.kind: only 'power-law' is supported in manifests");
        }
        positive(damping.nu0, "damping.nu0");
        if (!(damping.epsilon >= 0.0)) {
            throw ManifestError("damping.epsilon: must be nonnegative");
        }
    }
    switch (kind) {
        case ScenarioKind::AffineRun:
        case ScenarioKind::Phase:
            if (!(affine.b0 < 1.0)) throw ManifestError("affine.b0: must be < 1");
            positive(affine.t_end, "affine.t_end");
            tol_ok(affine.tol, "affine.tol");
            break;
        case ScenarioKind::Corrector:
            if (!(corrector.C >= 0.0)) throw ManifestError("corrector.C: must be >= 0");
            if (!(corrector.b0 < 1.0)) throw ManifestError("corrector.b0: must be < 1");
            if (!(corrector.b_min < corrector.b0)) {
                throw ManifestError("corrector.b_min: must be below corrector.b0");
            }
            if (corrector.points < 2) throw ManifestError("corrector.points: must be >= 2");
            break;
        case ScenarioKind::Sigma0:
            if (sigma0.branch != 1 && sigma0.branch != -1) {
                throw ManifestError("sigma0.branch: must be +1 or -1");
            }
            if (sigma0.samples < 3) throw ManifestError("sigma0.samples: must be >= 3");
            tol_ok(sigma0.tol, "sigma0.tol");
            break;
        case ScenarioKind::FieldRun:
        case ScenarioKind::EulerAnalog: {
            if (field.N < 16) throw ManifestError("field.N: must be >= 16");
            positive(field.t_end, "field.t_end");
            tol_ok(field.tol, "field.tol");
            positive(field.data.L, "field.data.L");
            const std::string& k = field.data.kind;
            if (k != "zero-velocity-sine" && k != "velocity-sine" && k != "affine" &&
                k != "custom-table") {
                throw ManifestError("field.data.kind: unknown kind '" + k + "'");
            }
            if ((k == "zero-velocity-sine" || k == "velocity-sine") &&
                !(std::abs(field.data.d) < 1.0)) {
                throw ManifestError("field.data.d: slope amplitude must satisfy |d| < 1");
            }
            if (k == "affine" && !(field.data.b0 < 1.0)) {
                throw ManifestError("field.data.b0: must be < 1");
            }
            if (k == "custom-table" && field.data.table_path.empty()) {
                throw ManifestError("field.data.table_path: required for custom-table data");
            }
            if (field.data.mode != "periodic" && field.data.mode != "clamped") {
                throw ManifestError("field.data.mode: must be 'periodic' or 'clamped'");
            }
            break;
        }
        case ScenarioKind::Sweep:
            if (sweep.N < 16) throw ManifestError("sweep.N: must be >= 16");
            positive(sweep.t_end, "sweep.t_end");
            tol_ok(sweep.tol, "sweep.tol");
            for (double e : sweep.epsilon_list) {
                if (!(e >= 0.0)) throw ManifestError("sweep.epsilon_list: must be nonnegative");
            }
            for (double d : sweep.d_list) {
                if (!(std::abs(d) < 1.0)) {
                    throw ManifestError("sweep.d_list: slope amplitudes must satisfy |d| < 1");
                }
            }
            break;
        case ScenarioKind::ConditionCheck:
            break;
        case ScenarioKind::Figures:
            if (!(figures.epsilon >= 0.0)) {
                throw ManifestError("figures.epsilon: must be nonnegative");
            }
            if (!(figures.b0 < 1.0)) throw ManifestError("figures.b0: must be < 1");
            break;
    }
}

bool Manifest::m_kind_needs_damping() const {
    return kind == ScenarioKind::AffineRun || kind == ScenarioKind::Phase ||
           kind == ScenarioKind::Corrector || kind == ScenarioKind::FieldRun ||
           kind == ScenarioKind::EulerAnalog || kind == ScenarioKind::ConditionCheck;
}

// ---------------------------------------------------------------- reports

ConditionReport condition_report(const DampingSpec& spec) {
    ConditionReport r;
    r.suppression = check_suppression_condition(spec);
    r.parabolic = check_parabolic_condition(spec);
    std::vector<double> grid;
    for (int i = 0; i <= 48; ++i) grid.push_back(std::pow(10.0, i / 8.0));
    const auto tail = check_tail_regularity(spec, grid);
    r.tail_regular = tail.passes;
    r.tail_limit = tail.limit_estimate;
    if (r.suppression) {
        r.behavior_class = r.tail_regular
                               ? "suppresses blow-up for all data"
                               : "suppresses affine data (tail regularity unverified)";
    } else if (r.parabolic) {
        r.behavior_class = "suppresses C=0 data only; C>0 data blow up for small epsilon";
    } else {
        r.behavior_class = "constant-damping regime; blow-up data exist";
    }
    return r;
}

std::string ConditionReport::to_text() const {
    std::ostringstream out;
    auto line = [&](const char* name, bool pass) {
        out << "  " << name << ": " << (pass ? "pass" : "fail") << "\n";
    };
    out << "condition report\n";
    line("damping integral divergent (suppression, all data)", suppression);
    line("parabolic-data criterion (C = 0 only)", parabolic);
    line("tail regularity (eta f'/f settles)", tail_regular);
    out << "  tail exponent estimate: " << g17(tail_limit) << "\n";
    out << "  predicted behavior: " << behavior_class << "\n";
    return out.str();
}

// ---------------------------------------------------------------- sweep

namespace {

SweepCell run_sweep_cell(double gamma, double epsilon, double d, const SweepConfig& cfg,
                         const DampingConfig& base) {
    SweepCell cell;
    cell.gamma = gamma;
    cell.epsilon = epsilon;
    cell.d = d;
    cell.N = cfg.N;
    cell.tol = cfg.tol;
    cell.t_end = cfg.t_end;
    try {
        const DampingSpec spec = DampingSpec::power_law(epsilon, base.nu0, gamma);
        const InitialData data = InitialData::sine(d);
        FieldOptions opt;
        opt.tol = cfg.tol;
        opt.crossing_delta_rel = cfg.crossing_delta_rel;
        const FieldResult res = run_field(data, spec, cfg.t_end, opt, cfg.N);
        cell.min_q = res.diagnostics.min_q;
        cell.min_spacing = res.diagnostics.min_spacing;
        cell.reentered = res.diagnostics.all_reentered();
        if (res.verdict.kind == VerdictKind::BlowUp) {
            cell.verdict = "blow-up";
            cell.t_star = res.verdict.time;
        } else if (cell.reentered) {
            cell.verdict = "smooth";
        } else {
            cell.verdict = "undetermined";
        }
    } catch (const std::exception& e) {
        cell.verdict = "error";
        cell.error = e.what();
    }
    return cell;
}

}  // namespace

SweepResult gamma_threshold_sweep(const SweepConfig& cfg, const DampingConfig& damping_base) {
    SweepResult result;
    struct CellKey {
        double gamma, epsilon, d;
    };
    std::vector<CellKey> keys;
    for (double d : cfg.d_list) {
        for (double eps : cfg.epsilon_list) {
            for (double g : cfg.gamma_list) keys.push_back({g, eps, d});
        }
    }
    result.cells.resize(keys.size());

    std::size_t workers = cfg.workers > 0 ? cfg.workers : std::thread::hardware_concurrency();
    workers = std::max<std::size_t>(1, std::min(workers, keys.size()));

    if (workers <= 1) {
        for (std::size_t i = 0; i < keys.size(); ++i) {
            result.cells[i] =
                run_sweep_cell(keys[i].gamma, keys[i].epsilon, keys[i].d, cfg, damping_base);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= keys.size()) return;
                    result.cells[i] = run_sweep_cell(keys[i].gamma, keys[i].epsilon, keys[i].d,
                                                     cfg, damping_base);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    // per-(epsilon, d) boundary summary
    for (double d : cfg.d_list) {
        for (double eps : cfg.epsilon_list) {
            SweepSummaryRow row;
            row.epsilon = eps;
            row.d = d;
            row.max_blowup_gamma = std::numeric_limits<double>::quiet_NaN();
            row.min_smooth_gamma = std::numeric_limits<double>::quiet_NaN();
            for (const auto& c : result.cells) {
                if (c.epsilon != eps || c.d != d) continue;
                if (c.verdict == "blow-up") {
                    if (std::isnan(row.max_blowup_gamma) || c.gamma > row.max_blowup_gamma) {
                        row.max_blowup_gamma = c.gamma;
                    }
                } else if (c.verdict == "smooth") {
                    if (std::isnan(row.min_smooth_gamma) || c.gamma < row.min_smooth_gamma) {
                        row.min_smooth_gamma = c.gamma;
                    }
                }
            }
            row.monotone = !(row.max_blowup_gamma >= row.min_smooth_gamma);
            result.summary.push_back(row);
        }
    }
    return result;
}

// ---------------------------------------------------------------- figures

Fig1Data reproduce_fig1(double epsilon, double a0, double b0) {
    if (!(epsilon >= 0.0)) throw std::domain_error("reproduce_fig1: epsilon must be >= 0");
    const DampingSpec damped = DampingSpec::power_law(epsilon, 1.0, 2.0);
    const DampingSpec undamped = DampingSpec::none();

    Fig1Data fig;
    // direction field of the damped system on a (b, a) grid
    const int nb = 24, na = 24;
    for (int i = 0; i < nb; ++i) {
        const double b = -4.0 + (0.9 + 4.0) * i / (nb - 1);
        for (int j = 0; j < na; ++j) {
            const double a = -4.0 + 8.0 * j / (na - 1);
            const double n = 1.0 - b;
            const double da = -a * a - b - epsilon * damped.f(n) * a;
            const double db = n * a;
            fig.direction_field.push_back({b, a, db, da});
        }
    }
    AffineState init;
    init.a = a0;
    init.b = b0;
    fig.curve_unperturbed = phase_curve(init, undamped, 50.0, 1e-10);
    fig.curve_perturbed = phase_curve(init, damped, 50.0, 1e-10);
    return fig;
}

Fig2Data reproduce_fig2(double a0, double b0, double t_end) {
    const DampingSpec damped = DampingSpec::power_law(1.0, 1.0, 2.0);
    const DampingSpec undamped = DampingSpec::none();
    AffineState init;
    init.a = a0;
    init.b = b0;

    Fig2Data fig;
    const SimOutcome run0 = integrate_affine(init, undamped, t_end, 1e-10);
    for (const auto& node : run0.trace.nodes()) fig.b_undamped.push_back({node.t, node.y[1]});
    const SimOutcome run1 = integrate_affine(init, damped, t_end, 1e-10);
    for (const auto& node : run1.trace.nodes()) {
        fig.b_damped.push_back({node.t, node.y[1]});
        if (node.t >= 0.6 * t_end) fig.b_tail.push_back({node.t, node.y[1]});
    }
    return fig;
}

// ---------------------------------------------------------------- outputs

namespace {

const char* kPlotFig1 = R"PY(#!/usr/bin/env python3
"""Direction field and phase curves (damped vs undamped)."""
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def load(path):
    rows = []
    with open(path) as fh:
        for row in csv.reader(r for r in fh if not r.startswith("#")):
            rows.append(row)
    head, data = rows[0], np.array(rows[1:], dtype=float)
    return head, data


def main(outdir="."):
    _, field = load(f"{outdir}/fig1_direction_field.csv")
    _, c0 = load(f"{outdir}/fig1_curve_undamped.csv")
    _, c1 = load(f"{outdir}/fig1_curve_damped.csv")

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 5))
    b, a, db, da = field.T
    norm = np.hypot(db, da)
    norm[norm == 0] = 1.0
    ax1.quiver(b, a, db / norm, da / norm, angles="xy", width=2e-3, color="0.4")
    ax1.set(xlabel="b", ylabel="a", title="direction field (damped)")

    for data, style, label in ((c0, "k--", "epsilon = 0"), (c1, "b-", "damped")):
        bb, aa = data.T
        keep = (np.abs(aa) < 8) & (bb > -8)
        ax2.plot(bb[keep], aa[keep], style, label=label)
    ax2.set(xlabel="b", ylabel="a", title="phase curves from one start")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(f"{outdir}/fig1.png", dpi=150)
    print(f"wrote {outdir}/fig1.png")


if __name__ == "__main__":
    main(*sys.argv[1:])
)PY";

const char* kPlotFig2 = R"PY(#!/usr/bin/env python3
"""b(t): undamped escape vs damped decaying oscillation."""
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def load(path):
    with open(path) as fh:
        rows = [r for r in csv.reader(x for x in fh if not x.startswith("#"))]
    return np.array(rows[1:], dtype=float)


def main(outdir="."):
    b0 = load(f"{outdir}/fig2_b_undamped.csv")
    b1 = load(f"{outdir}/fig2_b_damped.csv")
    tail = load(f"{outdir}/fig2_b_tail.csv")

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 5))
    keep = b0[:, 1] > -10
    ax1.plot(b0[keep, 0], b0[keep, 1], "k--", label="epsilon = 0")
    keep = b1[:, 1] > -10
    ax1.plot(b1[keep, 0], b1[keep, 1], "b-", label="damped")
    ax1.set(xlabel="t", ylabel="b", title="b(t)")
    ax1.legend()

    ax2.plot(tail[:, 0], tail[:, 1], "b-")
    ax2.set(xlabel="t", ylabel="b", title="damped tail near b = 0")
    fig.tight_layout()
    fig.savefig(f"{outdir}/fig2.png", dpi=150)
    print(f"wrote {outdir}/fig2.png")


if __name__ == "__main__":
    main(*sys.argv[1:])
)PY";

json verdict_json(const Verdict& v) {
    return json{{"kind", v.kind == VerdictKind::GloballySmooth ? "smooth" : "blow-up"},
                {"time", v.time}};
}

json field_summary(const FieldResult& res, double tol) {
    const char* signal = "none";
    switch (res.signal) {
        case BlowupSignal::QThreshold: signal = "q-threshold"; break;
        case BlowupSignal::Crossing: signal = "crossing"; break;
        case BlowupSignal::StepCollapse: signal = "step-collapse"; break;
        case BlowupSignal::None: break;
    }
    json j{{"verdict", verdict_json(res.verdict)},
           {"signal", signal},
           {"blowup_index", res.blowup_index},
           {"diagnostics",
            json{{"min_q", res.diagnostics.min_q},
                 {"min_density", res.diagnostics.min_density},
                 {"min_spacing", res.diagnostics.min_spacing},
                 {"max_energy_initial", res.diagnostics.max_energy_initial},
                 {"max_energy_run", res.diagnostics.max_energy_run},
                 {"accepted_steps", res.diagnostics.accepted_steps},
                 {"rejected_steps", res.diagnostics.rejected_steps},
                 {"all_reentered", res.diagnostics.all_reentered()}}}};
    const auto audit = energy_audit(res, tol);
    j["energy_audit"] = json{{"monotone", audit.monotone},
                             {"max_increase", audit.max_increase},
                             {"max_budget_residual", audit.max_budget_residual}};
    return j;
}

void emit_field_snapshots(const std::filesystem::path& path, const std::string& hash,
                          const FieldResult& res, bool analog) {
    CsvFile csv(path, hash, analog ? "t,x,V,q,n" : "t,x,V,E,q,s,n");
    for (const auto& snap : res.snapshots) {
        for (std::size_t i = 0; i < snap.x.size(); ++i) {
            if (analog) {
                csv.row({snap.t, snap.x[i], snap.V[i], snap.q[i], 1.0 - snap.s[i]});
            } else {
                csv.row({snap.t, snap.x[i], snap.V[i], snap.E[i], snap.q[i], snap.s[i],
                         1.0 - snap.s[i]});
            }
        }
    }
}

}  // namespace

std::vector<std::filesystem::path> run_scenario(const Manifest& manifest,
                                                const std::filesystem::path& out_root) {
    manifest.validate();
    const std::string hash = manifest.hash();
    const std::filesystem::path dir = out_root / manifest.output_dir;

    // Everything below first computes, then writes: a scenario that throws
    // mid-run leaves at most the directory behind, never partial tables.
    std::vector<std::filesystem::path> written;
    auto add = [&](const std::filesystem::path& p) { written.push_back(p); };
    auto write_summary = [&](const json& j) {
        const auto p = dir / "summary.json";
        write_text(p, j.dump(2) + "\n");
        add(p);
    };
    auto write_manifest_echo = [&]() {
        const auto p = dir / "manifest.json";
        write_text(p, manifest.canonical_json());
        add(p);
    };

    switch (manifest.kind) {
        case ScenarioKind::AffineRun: {
            const DampingSpec spec = manifest.damping.build();
            AffineState init;
            init.a = manifest.affine.a0;
            init.b = manifest.affine.b0;
            init.A = manifest.affine.A0;
            init.B = manifest.affine.B0;
            AffineOptions opt;
            opt.paper_sign = manifest.affine.paper_sign;
            const SimOutcome out =
                integrate_affine(init, spec, manifest.affine.t_end, manifest.affine.tol, opt);

            std::filesystem::create_directories(dir);
            write_manifest_echo();
            {
                CsvFile csv(dir / "affine_trace.csv", hash, "t,a,b,A,B,step,invC");
                for (const auto& node : out.trace.nodes()) {
                    csv.row({node.t, node.y[0], node.y[1], node.y[2], node.y[3], node.h,
                             conic_invariant(node.y[0], node.y[1])});
                }
                add(dir / "affine_trace.csv");
            }
            const ConicClass conic = conic_constant(manifest.affine.a0, manifest.affine.b0);
            write_summary(json{{"verdict", verdict_json(out.verdict)},
                               {"C", conic.C},
                               {"conic", conic.kind == ConicKind::Ellipse    ? "ellipse"
                                         : conic.kind == ConicKind::Parabola ? "parabola"
                                                                             : "hyperbola"},
                               {"max_abs_a", out.diagnostics.max_abs_a},
                               {"min_b", out.diagnostics.min_b},
                               {"accepted_steps", out.diagnostics.accepted_steps}});
            break;
        }
        case ScenarioKind::Phase: {
            const DampingSpec spec = manifest.damping.build();
            AffineState init;
            init.a = manifest.affine.a0;
            init.b = manifest.affine.b0;
            const auto pts =
                phase_curve(init, spec, manifest.affine.t_end, manifest.affine.tol);
            std::filesystem::create_directories(dir);
            write_manifest_echo();
            CsvFile csv(dir / "phase.csv", hash, "b,a");
            for (const auto& p : pts) csv.row({p[0], p[1]});
            add(dir / "phase.csv");
            break;
        }
        case ScenarioKind::Corrector: {
            const DampingSpec spec = manifest.damping.build();
            std::vector<double> grid;
            const auto& c = manifest.corrector;
            for (std::size_t i = 0; i < c.points; ++i) {
                // log-spaced in (1 - b) between b0 - 0.05 and b_min
                const double u0 = std::log(1.0 - (c.b0 - 0.05));
                const double u1 = std::log(1.0 - c.b_min);
                const double u = u0 + (u1 - u0) * static_cast<double>(i) / (c.points - 1);
                grid.push_back(1.0 - std::exp(u));
            }
            const CorrectorCurve curve = corrector_alpha1(c.C, c.b0, spec, grid);
            std::filesystem::create_directories(dir);
            write_manifest_echo();
            CsvFile csv(dir / "corrector.csv", hash, "b,alpha1");
            for (std::size_t i = 0; i < curve.b_grid.size(); ++i) {
                csv.row({curve.b_grid[i], curve.alpha1[i]});
            }
            add(dir / "corrector.csv");
            write_summary(json{{"C", c.C}, {"b0", c.b0}, {"points", c.points}});
            break;
        }
        case ScenarioKind::Sigma0: {
            const auto& s = manifest.sigma0;
            const auto samples = sigma0_system(s.s_start, s.s_end, s.sigma0, s.xi0, s.C,
                                               s.branch, s.tol, s.samples);
            const SigmaZeroFit fit = fit_sigma0(samples, s.C, s.branch);
            std::filesystem::create_directories(dir);
            write_manifest_echo();
            CsvFile csv(dir / "sigma0.csv", hash, "s,sigma0,xi0,sigma0_closed");
            for (const auto& smp : samples) {
                const double closed =
                    (smp.s - 1.0) * (fit.C1 * smp.s +
                                     fit.C2 * unperturbed_branch(smp.s, s.C, s.branch));
                csv.row({smp.s, smp.sigma0, smp.xi0, closed});
            }
            add(dir / "sigma0.csv");
            write_summary(
                json{{"C1", fit.C1}, {"C2", fit.C2}, {"residual", fit.residual}});
            break;
        }
        case ScenarioKind::FieldRun:
        case ScenarioKind::EulerAnalog: {
            const bool analog = manifest.kind == ScenarioKind::EulerAnalog;
            const DampingSpec spec = manifest.damping.build();
            const InitialData data = manifest.field.data.build();
            const FieldResult res =
                analog ? run_euler_analog(data, spec, manifest.field.t_end,
                                          manifest.field.options(), manifest.field.N)
                       : run_field(data, spec, manifest.field.t_end, manifest.field.options(),
                                   manifest.field.N);
            std::filesystem::create_directories(dir);
            write_manifest_echo();
            const auto snap_path = dir / (analog ? "analog_snapshots.csv" : "field_snapshots.csv");
            emit_field_snapshots(snap_path, hash, res, analog);
            add(snap_path);
            write_summary(field_summary(res, manifest.field.tol));
            break;
        }
        case ScenarioKind::Sweep: {
            const SweepResult res = gamma_threshold_sweep(manifest.sweep, manifest.damping);
            std::filesystem::create_directories(dir);
            write_manifest_echo();
            {
                CsvFile csv(dir / "sweep.csv", hash,
                            "gamma,epsilon,d,N,tol,verdict,t_star,t_end,min_q,min_spacing,"
                            "reentered,error");
                for (const auto& c : res.cells) {
                    std::ostringstream row;
                    row << g17(c.gamma) << ',' << g17(c.epsilon) << ',' << g17(c.d) << ','
                        << c.N << ',' << g17(c.tol) << ',' << c.verdict << ',' << g17(c.t_star)
                        << ',' << g17(c.t_end) << ',' << g17(c.min_q) << ','
                        << g17(c.min_spacing) << ',' << (c.reentered ? 1 : 0) << ','
                        << c.error;
                    csv.raw_row(row.str());
                }
                add(dir / "sweep.csv");
            }
            {
                CsvFile csv(dir / "sweep_summary.csv", hash,
                            "epsilon,d,max_blowup_gamma,min_smooth_gamma,monotone");
                for (const auto& r : res.summary) {
                    std::ostringstream row;
                    row << g17(r.epsilon) << ',' << g17(r.d) << ',' << g17(r.max_blowup_gamma)
                        << ',' << g17(r.min_smooth_gamma) << ',' << (r.monotone ? 1 : 0);
                    csv.raw_row(row.str());
                }
                add(dir / "sweep_summary.csv");
            }
            break;
        }
        case ScenarioKind::ConditionCheck: {
            const ConditionReport rep = condition_report(manifest.damping.build());
            std::filesystem::create_directories(dir);
            write_manifest_echo();
            write_text(dir / "condition_report.json",
                       json{{"suppression", rep.suppression},
                            {"parabolic", rep.parabolic},
                            {"tail_regular", rep.tail_regular},
                            {"tail_limit", rep.tail_limit},
                            {"behavior_class", rep.behavior_class}}
                               .dump(2) +
                           "\n");
            add(dir / "condition_report.json");
            break;
        }
        case ScenarioKind::Figures: {
            const Fig1Data fig1 =
                reproduce_fig1(manifest.figures.epsilon, manifest.figures.a0, manifest.figures.b0);
            const Fig2Data fig2 = reproduce_fig2(manifest.figures.a0, manifest.figures.b0);
            std::filesystem::create_directories(dir);
            write_manifest_echo();
            {
                CsvFile csv(dir / "fig1_direction_field.csv", hash, "b,a,db_dt,da_dt");
                for (const auto& p : fig1.direction_field) csv.row({p[0], p[1], p[2], p[3]});
                add(dir / "fig1_direction_field.csv");
            }
            {
                CsvFile csv(dir / "fig1_curve_undamped.csv", hash, "b,a");
                for (const auto& p : fig1.curve_unperturbed) csv.row({p[0], p[1]});
                add(dir / "fig1_curve_undamped.csv");
            }
            {
                CsvFile csv(dir / "fig1_curve_damped.csv", hash, "b,a");
                for (const auto& p : fig1.curve_perturbed) csv.row({p[0], p[1]});
                add(dir / "fig1_curve_damped.csv");
            }
            {
                CsvFile csv(dir / "fig2_b_undamped.csv", hash, "t,b");
                for (const auto& p : fig2.b_undamped) csv.row({p[0], p[1]});
                add(dir / "fig2_b_undamped.csv");
            }
            {
                CsvFile csv(dir / "fig2_b_damped.csv", hash, "t,b");
                for (const auto& p : fig2.b_damped) csv.row({p[0], p[1]});
                add(dir / "fig2_b_damped.csv");
            }
            {
                CsvFile csv(dir / "fig2_b_tail.csv", hash, "t,b");
                for (const auto& p : fig2.b_tail) csv.row({p[0], p[1]});
                add(dir / "fig2_b_tail.csv");
            }
            write_text(dir / "plot_fig1.py", kPlotFig1);
            add(dir / "plot_fig1.py");
            write_text(dir / "plot_fig2.py", kPlotFig2);
            add(dir / "plot_fig2.py");
            break;
        }
    }
    return written;
}

}  // namespace coldplasma
