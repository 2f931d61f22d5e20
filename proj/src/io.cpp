#include "mqcsim/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "mqcsim/error.hpp"

namespace mqcsim {

using nlohmann::json;

std::string to_string(Format format) { return format == Format::Csv ? "csv" : "json"; }

Format format_from_string(const std::string& name) {
    if (name == "csv") return Format::Csv;
    if (name == "json") return Format::Json;
    throw ConfigError(fmt::format("format must be 'csv' or 'json', got '{}'", name));
}

std::string to_string(DqBlockLayout layout) {
    return layout == DqBlockLayout::PulseFirst ? "pulse_first" : "symmetric";
}

DqBlockLayout layout_from_string(const std::string& name) {
    if (name == "pulse_first") return DqBlockLayout::PulseFirst;
    if (name == "symmetric") return DqBlockLayout::Symmetric;
    throw InvalidArgument(fmt::format("unknown DQ block layout '{}'", name));
}

namespace {

// Reads the keys of one JSON object, remembering which ones were used so
// that typos are reported instead of silently ignored.
class Fields {
public:
    Fields(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) throw ConfigError(fmt::format("{}: expected an object", label()));
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return doc_.contains(key);
    }
    const json& at(const std::string& key) { return doc_.at(key); }
    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void get(const std::string& key, double& out) {
        if (!has(key)) return;
        const auto& v = doc_.at(key);
        if (!v.is_number()) fail(key, "expected a number");
        out = v.get<double>();
    }
    void get(const std::string& key, int& out) {
        if (!has(key)) return;
        const auto& v = doc_.at(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        out = v.get<int>();
    }
    void get(const std::string& key, unsigned& out) {
        if (!has(key)) return;
        const auto& v = doc_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) fail(key, "expected a non-negative integer");
        out = v.get<unsigned>();
    }
    void get(const std::string& key, std::uint64_t& out) {
        if (!has(key)) return;
        const auto& v = doc_.at(key);
        if (v.is_number_unsigned()) {
            out = v.get<std::uint64_t>();
        } else if (v.is_number_integer() && v.get<long long>() >= 0) {
            out = static_cast<std::uint64_t>(v.get<long long>());
        } else {
            fail(key, "expected a non-negative integer");
        }
    }
    void get(const std::string& key, bool& out) {
        if (!has(key)) return;
        const auto& v = doc_.at(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        out = v.get<bool>();
    }
    void get(const std::string& key, std::string& out) {
        if (!has(key)) return;
        const auto& v = doc_.at(key);
        if (!v.is_string()) fail(key, "expected a string");
        out = v.get<std::string>();
    }
    void get(const std::string& key, std::vector<double>& out) {
        if (!has(key)) return;
        const auto& v = doc_.at(key);
        if (!v.is_array()) fail(key, "expected an array of numbers");
        out.clear();
        for (const auto& x : v) {
            if (!x.is_number()) fail(key, "expected an array of numbers");
            out.push_back(x.get<double>());
        }
    }
    void get(const std::string& key, std::vector<std::string>& out) {
        if (!has(key)) return;
        const auto& v = doc_.at(key);
        if (!v.is_array()) fail(key, "expected an array of strings");
        out.clear();
        for (const auto& x : v) {
            if (!x.is_string()) fail(key, "expected an array of strings");
            out.push_back(x.get<std::string>());
        }
    }
    // Enumerations stored as strings.
    template <typename T, typename Parse>
    void get_enum(const std::string& key, T& out, Parse parse) {
        std::string name;
        if (!has(key)) return;
        get(key, name);
        try {
            out = parse(name);
        } catch (const Error& e) {
            fail(key, e.what());
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError(fmt::format("{}: {}", where(key), what));
    }

    void finish() const {
        for (auto it = doc_.begin(); it != doc_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(fmt::format("{}: unknown key", where(it.key())));
        }
    }

private:
    std::string label() const { return path_.empty() ? "config" : path_; }

    const json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(fmt::format("{}: {}", field, what));
}

}  // namespace

json to_json(const RunConfig& c) {
    json doc;
    doc["rng_seed"] = c.rng_seed;
    doc["output_dir"] = c.output_dir;
    doc["format"] = to_string(c.format);
    if (c.system) doc["system"] = to_json(*c.system);
    doc["mqc"] = {
        {"n_max", c.mqc.n_max},
        {"tau_dq", c.mqc.tau_dq},
        {"n_phases", c.mqc.n_phases},
        {"mode", to_string(c.mqc.mode)},
        {"mismatch", c.mqc.mismatch},
        {"filter_delay", c.mqc.filter_delay},
        {"max_pulses", c.mqc.max_pulses},
        {"otoc_direct_max_spins", c.mqc.otoc_direct_max_spins},
        {"block",
         {{"delta1", c.mqc.block.delta1}, {"delta2", c.mqc.block.delta2}, {"layout", to_string(c.mqc.block.layout)}}},
    };
    const auto& d = c.dd.config;
    doc["dd"] = {
        {"tau", d.tau},
        {"theta", d.theta},
        {"n_cycles", d.n_cycles},
        {"transient_skip", d.transient_skip},
        {"noise_sigma", d.noise_sigma},
        {"n_scans", d.n_scans},
        {"detection", to_string(d.detection)},
        {"max_relative_residual", c.dd.fit.max_relative_residual},
        {"collapse_tolerance", c.dd.fit.collapse_tolerance},
    };
    doc["sweep"] = {{"tau_grid", c.sweep.tau_grid}, {"theta_grid", c.sweep.theta_grid}, {"threads", c.sweep.threads}};
    const auto& v = c.inversion;
    doc["inversion"] = {
        {"inputs", v.inputs},
        {"noise_estimate", v.noise_estimate},
        {"alpha_rule", to_string(v.rule)},
        {"alpha", v.alpha},
        {"s_min", v.s_min},
        {"s_max", v.s_max},
        {"n_grid", v.n_grid},
        {"prominence", v.prominence},
        {"front_fraction", v.front_fraction},
        {"tau_dq", v.tau_dq},
        {"continue_on_error", v.continue_on_error},
    };
    doc["growth"] = {{"inputs", c.growth.inputs},
                     {"front_exponent", c.growth.front_exponent},
                     {"width_exponent", c.growth.width_exponent}};
    return doc;
}

RunConfig config_from_json(const json& doc) {
    RunConfig c;
    Fields top(doc, "");
    top.get("rng_seed", c.rng_seed);
    top.get("output_dir", c.output_dir);
    top.get_enum("format", c.format, format_from_string);
    if (top.has("system")) {
        try {
            c.system = system_from_json(top.at("system"));
        } catch (const Error& e) {
            throw ConfigError(fmt::format("system: {}", e.what()));
        }
    }
    if (top.has("mqc")) {
        Fields f(top.at("mqc"), "mqc");
        auto& m = c.mqc;
        f.get("n_max", m.n_max);
        f.get("tau_dq", m.tau_dq);
        f.get("n_phases", m.n_phases);
        f.get_enum("mode", m.mode, mqc_mode_from_string);
        f.get("mismatch", m.mismatch);
        f.get("filter_delay", m.filter_delay);
        f.get("max_pulses", m.max_pulses);
        f.get("otoc_direct_max_spins", m.otoc_direct_max_spins);
        if (f.has("block")) {
            Fields b(f.at("block"), "mqc.block");
            b.get("delta1", m.block.delta1);
            b.get("delta2", m.block.delta2);
            b.get_enum("layout", m.block.layout, layout_from_string);
            b.finish();
        }
        f.finish();
        require(m.n_max >= 0, "mqc.n_max", "must be >= 0");
        require(m.tau_dq > 0.0, "mqc.tau_dq", "must be positive");
        require(m.n_phases >= 1, "mqc.n_phases", "must be >= 1");
        require(m.max_pulses >= 0, "mqc.max_pulses", "must be >= 0");
        require(m.filter_delay >= 0.0, "mqc.filter_delay", "must be >= 0");
        require(m.block.delta1 > 0.0 && m.block.delta2 > 0.0, "mqc.block", "delays must be positive");
    }
    if (top.has("dd")) {
        Fields f(top.at("dd"), "dd");
        auto& d = c.dd.config;
        f.get("tau", d.tau);
        f.get("theta", d.theta);
        f.get("n_cycles", d.n_cycles);
        f.get("transient_skip", d.transient_skip);
        f.get("noise_sigma", d.noise_sigma);
        f.get("n_scans", d.n_scans);
        f.get_enum("detection", d.detection, dd_detection_from_string);
        f.get("max_relative_residual", c.dd.fit.max_relative_residual);
        f.get("collapse_tolerance", c.dd.fit.collapse_tolerance);
        f.finish();
        try {
            d.validate();
        } catch (const Error& e) {
            throw ConfigError(fmt::format("dd: {}", e.what()));
        }
    }
    c.dd.config.rng_seed = c.rng_seed;
    if (top.has("sweep")) {
        Fields f(top.at("sweep"), "sweep");
        f.get("tau_grid", c.sweep.tau_grid);
        f.get("theta_grid", c.sweep.theta_grid);
        f.get("threads", c.sweep.threads);
        f.finish();
        require(!c.sweep.tau_grid.empty(), "sweep.tau_grid", "must not be empty");
        require(!c.sweep.theta_grid.empty(), "sweep.theta_grid", "must not be empty");
    }
    if (top.has("inversion")) {
        Fields f(top.at("inversion"), "inversion");
        auto& v = c.inversion;
        f.get("inputs", v.inputs);
        f.get("noise_estimate", v.noise_estimate);
        f.get_enum("alpha_rule", v.rule, alpha_rule_from_string);
        f.get("alpha", v.alpha);
        f.get("s_min", v.s_min);
        f.get("s_max", v.s_max);
        f.get("n_grid", v.n_grid);
        f.get("prominence", v.prominence);
        f.get("front_fraction", v.front_fraction);
        f.get("tau_dq", v.tau_dq);
        f.get("continue_on_error", v.continue_on_error);
        f.finish();
        require(v.s_min > 0.0 && v.s_max > v.s_min, "inversion.s_min", "need 0 < s_min < s_max");
        require(v.n_grid >= 8, "inversion.n_grid", "must be >= 8");
        require(v.alpha >= 0.0, "inversion.alpha", "must be >= 0");
        require(v.front_fraction > 0.0 && v.front_fraction < 1.0, "inversion.front_fraction", "must lie in (0, 1)");
        require(v.tau_dq > 0.0, "inversion.tau_dq", "must be positive");
    }
    if (top.has("growth")) {
        Fields f(top.at("growth"), "growth");
        f.get("inputs", c.growth.inputs);
        f.get("front_exponent", c.growth.front_exponent);
        f.get("width_exponent", c.growth.width_exponent);
        f.finish();
    }
    top.finish();
    return c;
}

json parse_json_file(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError(fmt::format("{}:{}:{}: JSON parse error: {}", path.string(), line, col, e.what()));
    }
}

RunConfig load_config(const std::filesystem::path& path) {
    try {
        return config_from_json(parse_json_file(path));
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind(path.string(), 0) == 0) throw;
        throw ConfigError(fmt::format("{}: {}", path.string(), what));
    }
}

json make_manifest(const std::string& command, const RunConfig& config) {
    return {{"tool", "mqcsim"},
            {"version", kToolVersion},
            {"schema_version", kSchemaVersion},
            {"command", command},
            {"config", to_json(config)}};
}

RunConfig config_from_manifest(const json& manifest) {
    if (!manifest.is_object() || !manifest.contains("config")) throw SchemaError("manifest has no 'config'");
    if (manifest.value("schema_version", -1) != kSchemaVersion)
        throw SchemaError(fmt::format("unsupported manifest schema_version {}", manifest.value("schema_version", -1)));
    return config_from_json(manifest.at("config"));
}

OutputLock::OutputLock(const std::filesystem::path& dir) : path_(dir / kName) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
        throw Error(fmt::format("output directory {} is locked ({} exists); another run may be active",
                                dir.string(), path_.string()));
    }
    std::fclose(f);
}

OutputLock::~OutputLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
}

std::string format_double(double x) { return fmt::format("{:.17g}", x == 0.0 ? 0.0 : x); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
    out << text;
    if (!out) throw Error(fmt::format("failed writing {}", path.string()));
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot open {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

struct CsvTable {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;
};

CsvTable parse_csv(const std::string& text, const std::string& header) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool saw_header = false;
    const std::size_t n_cols = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != header)
                throw SchemaError(fmt::format("line {}: expected header '{}', found '{}'", lineno, header, line));
            saw_header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() != n_cols)
            throw SchemaError(fmt::format("line {}: expected {} columns, found {}", lineno, n_cols, cells.size()));
        t.rows.push_back(std::move(cells));
        t.lines.push_back(lineno);
    }
    if (!saw_header) throw SchemaError(fmt::format("missing header '{}'", header));
    return t;
}

double to_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw SchemaError(fmt::format("line {}: '{}' is not a number", line, s));
    return v;
}

long long to_int(const std::string& s, std::size_t line) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw SchemaError(fmt::format("line {}: '{}' is not an integer", line, s));
    return v;
}

std::string join(std::initializer_list<std::string> cells) {
    std::string out;
    for (const auto& c : cells) {
        if (!out.empty()) out += ',';
        out += c;
    }
    out += '\n';
    return out;
}

void check_schema(const json& doc, const std::string& kind) {
    if (!doc.is_object()) throw SchemaError(fmt::format("{} document must be an object", kind));
    if (doc.value("schema_version", -1) != kSchemaVersion)
        throw SchemaError(fmt::format("{}: unsupported schema_version", kind));
    if (doc.value("kind", std::string()) != kind)
        throw SchemaError(fmt::format("expected a '{}' document, found '{}'", kind, doc.value("kind", std::string())));
}

template <typename F>
auto schema_guard(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw SchemaError(fmt::format("{}: {}", what, e.what()));
    }
}

}  // namespace

std::string spectra_to_csv(const std::vector<CoherenceSpectrum>& spectra, bool nonzero_only) {
    std::string out = "n,k,value\n";
    for (const auto& s : spectra) {
        for (std::size_t i = 0; i < s.orders.size(); ++i) {
            if (nonzero_only && s.weights[i] == 0.0) continue;
            out += join({std::to_string(s.n_blocks), std::to_string(s.orders[i]), format_double(s.weights[i])});
        }
    }
    return out;
}

std::vector<CoherenceSpectrum> spectra_from_csv(const std::string& text) {
    const auto t = parse_csv(text, "n,k,value");
    std::vector<CoherenceSpectrum> out;
    std::map<long long, std::size_t> index;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const long long n = to_int(row[0], t.lines[r]);
        if (n < 0) throw SchemaError(fmt::format("line {}: n must be >= 0", t.lines[r]));
        auto [it, fresh] = index.emplace(n, out.size());
        if (fresh) {
            out.emplace_back();
            out.back().n_blocks = static_cast<int>(n);
        }
        auto& s = out[it->second];
        const int k = static_cast<int>(to_int(row[1], t.lines[r]));
        if (std::find(s.orders.begin(), s.orders.end(), k) != s.orders.end())
            throw SchemaError(fmt::format("line {}: duplicate order {} for n = {}", t.lines[r], k, n));
        s.orders.push_back(k);
        s.weights.push_back(to_double(row[2], t.lines[r]));
    }
    for (auto& s : out) s.normalization = std::accumulate(s.weights.begin(), s.weights.end(), 0.0);
    return out;
}

json spectra_to_json(const std::vector<CoherenceSpectrum>& spectra, bool nonzero_only) {
    json list = json::array();
    for (const auto& s : spectra) {
        json orders = json::array(), weights = json::array();
        for (std::size_t i = 0; i < s.orders.size(); ++i) {
            if (nonzero_only && s.weights[i] == 0.0) continue;
            orders.push_back(s.orders[i]);
            weights.push_back(s.weights[i]);
        }
        list.push_back({{"n", s.n_blocks},
                        {"orders", orders},
                        {"weights", weights},
                        {"normalization", s.normalization},
                        {"imag_residue", s.imag_residue}});
    }
    return {{"schema_version", kSchemaVersion}, {"kind", "spectra"}, {"spectra", list}};
}

std::vector<CoherenceSpectrum> spectra_from_json(const json& doc) {
    check_schema(doc, "spectra");
    return schema_guard("spectra", [&] {
        std::vector<CoherenceSpectrum> out;
        for (const auto& item : doc.at("spectra")) {
            CoherenceSpectrum s;
            s.n_blocks = item.at("n").get<int>();
            s.orders = item.at("orders").get<std::vector<int>>();
            s.weights = item.at("weights").get<std::vector<double>>();
            if (s.orders.size() != s.weights.size()) throw SchemaError("spectra: orders and weights differ in length");
            s.normalization = item.value("normalization", std::accumulate(s.weights.begin(), s.weights.end(), 0.0));
            s.imag_residue = item.value("imag_residue", 0.0);
            out.push_back(std::move(s));
        }
        return out;
    });
}

std::vector<CoherenceSpectrum> read_spectra(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    try {
        if (ext == ".json") return spectra_from_json(parse_json_file(path));
        if (ext == ".csv") return spectra_from_csv(read_text(path));
    } catch (const SchemaError& e) {
        throw SchemaError(fmt::format("{}: {}", path.string(), e.what()));
    }
    throw SchemaError(fmt::format("{}: expected a .csv or .json spectrum file", path.string()));
}

std::string phase_signals_to_csv(const std::vector<PhaseSignal>& signals) {
    std::string out = "n,phi,value\n";
    for (const auto& s : signals)
        for (std::size_t j = 0; j < s.phi.size(); ++j)
            out += join({std::to_string(s.n_blocks), format_double(s.phi[j]), format_double(s.values[j].real())});
    return out;
}

std::vector<PhaseSignal> phase_signals_from_csv(const std::string& text) {
    const auto t = parse_csv(text, "n,phi,value");
    std::vector<PhaseSignal> out;
    std::map<long long, std::size_t> index;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const long long n = to_int(t.rows[r][0], t.lines[r]);
        auto [it, fresh] = index.emplace(n, out.size());
        if (fresh) {
            out.emplace_back();
            out.back().n_blocks = static_cast<int>(n);
        }
        out[it->second].phi.push_back(to_double(t.rows[r][1], t.lines[r]));
        out[it->second].values.emplace_back(to_double(t.rows[r][2], t.lines[r]), 0.0);
    }
    return out;
}

std::string nseries_to_csv(const NSeries& series) {
    std::string out = "n,value\n";
    for (std::size_t i = 0; i < series.n.size(); ++i)
        out += join({std::to_string(series.n[i]), format_double(series.value[i])});
    return out;
}

NSeries nseries_from_csv(const std::string& text) {
    const auto t = parse_csv(text, "n,value");
    NSeries out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out.n.push_back(static_cast<int>(to_int(t.rows[r][0], t.lines[r])));
        out.value.push_back(to_double(t.rows[r][1], t.lines[r]));
    }
    return out;
}

std::string dd_series_to_csv(const DdSeries& s) {
    std::string out = "cycle,t,signal,clean\n";
    for (std::size_t j = 0; j < s.t.size(); ++j)
        out += join({std::to_string(j), format_double(s.t[j]), format_double(s.signal[j]), format_double(s.clean[j])});
    return out;
}

DdSeries dd_series_from_csv(const std::string& text) {
    const auto t = parse_csv(text, "cycle,t,signal,clean");
    DdSeries s;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (to_int(t.rows[r][0], t.lines[r]) != static_cast<long long>(r))
            throw SchemaError(fmt::format("line {}: cycles must count up from 0", t.lines[r]));
        s.t.push_back(to_double(t.rows[r][1], t.lines[r]));
        s.signal.push_back(to_double(t.rows[r][2], t.lines[r]));
        s.clean.push_back(to_double(t.rows[r][3], t.lines[r]));
    }
    return s;
}

json to_json(const DdSeries& s) {
    return {{"schema_version", kSchemaVersion},
            {"kind", "dd_series"},
            {"t", s.t},
            {"signal", s.signal},
            {"clean", s.clean},
            {"sigma_eff", s.sigma_eff}};
}

json to_json(const DecayFit& f) {
    return {{"a_fast", f.a_fast},           {"t_fast", f.t_fast},
            {"a_slow", f.a_slow},           {"t_slow", f.t_slow},
            {"residual_rms", f.residual_rms}, {"fit_window", {f.first_index, f.last_index}},
            {"single_exponential", f.single_exponential}};
}

DecayFit decay_fit_from_json(const json& doc) {
    return schema_guard("decay fit", [&] {
        DecayFit f;
        f.a_fast = doc.at("a_fast").get<double>();
        f.t_fast = doc.at("t_fast").get<double>();
        f.a_slow = doc.at("a_slow").get<double>();
        f.t_slow = doc.at("t_slow").get<double>();
        f.residual_rms = doc.at("residual_rms").get<double>();
        const auto w = doc.at("fit_window").get<std::vector<std::size_t>>();
        if (w.size() != 2) throw SchemaError("decay fit: fit_window must have two entries");
        f.first_index = w[0];
        f.last_index = w[1];
        f.single_exponential = doc.value("single_exponential", false);
        return f;
    });
}

std::string sweep_to_csv(const SweepResult& result) {
    std::string out = "tau,theta,a_fast,t_fast,a_slow,t_slow,n_star,snr,status\n";
    for (const auto& c : result.cells) {
        const bool ok = c.fit.has_value();
        out += join({format_double(c.tau), format_double(c.theta), ok ? format_double(c.fit->a_fast) : "",
                     ok ? format_double(c.fit->t_fast) : "", ok ? format_double(c.fit->a_slow) : "",
                     ok ? format_double(c.fit->t_slow) : "", std::to_string(c.n_star), format_double(c.snr),
                     c.status});
    }
    return out;
}

std::vector<SweepCell> sweep_cells_from_csv(const std::string& text) {
    const auto t = parse_csv(text, "tau,theta,a_fast,t_fast,a_slow,t_slow,n_star,snr,status");
    std::vector<SweepCell> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto line = t.lines[r];
        SweepCell c;
        c.tau = to_double(row[0], line);
        c.theta = to_double(row[1], line);
        if (!row[2].empty()) {
            DecayFit f;
            f.a_fast = to_double(row[2], line);
            f.t_fast = to_double(row[3], line);
            f.a_slow = to_double(row[4], line);
            f.t_slow = to_double(row[5], line);
            f.single_exponential = f.a_fast == 0.0;
            c.fit = f;
            c.total_amplitude = f.a_fast + f.a_slow;
        }
        c.n_star = static_cast<int>(to_int(row[6], line));
        c.snr = to_double(row[7], line);
        c.status = row[8];
        if (c.status != "ok" && c.status != "fit_failure" && c.status != "error")
            throw SchemaError(fmt::format("line {}: unknown status '{}'", line, c.status));
        out.push_back(std::move(c));
    }
    return out;
}

json sweep_to_json(const SweepResult& result) {
    const std::size_t nt = result.tau_grid.size(), nq = result.theta_grid.size();
    auto matrix = [&](auto value) {
        json rows = json::array();
        for (std::size_t i = 0; i < nt; ++i) {
            json row = json::array();
            for (std::size_t j = 0; j < nq; ++j) row.push_back(value(result.at(i, j)));
            rows.push_back(row);
        }
        return rows;
    };
    auto or_null = [](const SweepCell& c, double DecayFit::*m) -> json {
        return c.fit ? json((*c.fit).*m) : json(nullptr);
    };
    json cells = json::array();
    for (const auto& c : result.cells) {
        cells.push_back({{"tau", c.tau},
                         {"theta", c.theta},
                         {"fit", c.fit ? to_json(*c.fit) : json(nullptr)},
                         {"total_amplitude", c.total_amplitude},
                         {"n_star", c.n_star},
                         {"snr", c.snr},
                         {"status", c.status},
                         {"message", c.message},
                         {"seed", c.seed}});
    }
    return {{"schema_version", kSchemaVersion},
            {"kind", "sweep"},
            {"tau_grid", result.tau_grid},
            {"theta_grid", result.theta_grid},
            {"total_amplitude", matrix([](const SweepCell& c) { return c.total_amplitude; })},
            {"t_fast", matrix([&](const SweepCell& c) { return or_null(c, &DecayFit::t_fast); })},
            {"t_slow", matrix([&](const SweepCell& c) { return or_null(c, &DecayFit::t_slow); })},
            {"n_star", matrix([](const SweepCell& c) { return c.n_star; })},
            {"snr", matrix([](const SweepCell& c) { return c.snr; })},
            {"cells", cells}};
}

std::string distributions_to_csv(const std::vector<ClusterDistribution>& dists) {
    std::string out = "n,s,f\n";
    for (const auto& d : dists)
        for (std::size_t j = 0; j < d.f.size(); ++j)
            out += join({std::to_string(d.n_blocks), format_double(d.size_grid[j]), format_double(d.f[j])});
    return out;
}

std::vector<ClusterDistribution> distributions_from_csv(const std::string& text) {
    const auto t = parse_csv(text, "n,s,f");
    std::vector<ClusterDistribution> out;
    std::map<long long, std::size_t> index;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const long long n = to_int(t.rows[r][0], t.lines[r]);
        auto [it, fresh] = index.emplace(n, out.size());
        if (fresh) {
            out.emplace_back();
            out.back().n_blocks = static_cast<int>(n);
        }
        auto& d = out[it->second];
        const double s = to_double(t.rows[r][1], t.lines[r]);
        if (!d.size_grid.empty() && !(s > d.size_grid.back()))
            throw SchemaError(fmt::format("line {}: sizes must increase within n = {}", t.lines[r], n));
        const double f = to_double(t.rows[r][2], t.lines[r]);
        if (f < 0.0) throw SchemaError(fmt::format("line {}: negative weight", t.lines[r]));
        d.size_grid.push_back(s);
        d.f.push_back(f);
    }
    return out;
}

json distributions_to_json(const std::vector<ClusterDistribution>& dists) {
    json list = json::array();
    for (const auto& d : dists) {
        list.push_back({{"n", d.n_blocks},
                        {"s", d.size_grid},
                        {"f", d.f},
                        {"alpha", d.alpha},
                        {"residual_norm", d.residual_norm},
                        {"roughness", d.roughness},
                        {"warnings", d.warnings}});
    }
    return {{"schema_version", kSchemaVersion}, {"kind", "distributions"}, {"distributions", list}};
}

std::vector<ClusterDistribution> distributions_from_json(const json& doc) {
    check_schema(doc, "distributions");
    return schema_guard("distributions", [&] {
        std::vector<ClusterDistribution> out;
        for (const auto& item : doc.at("distributions")) {
            ClusterDistribution d;
            d.n_blocks = item.at("n").get<int>();
            d.size_grid = item.at("s").get<std::vector<double>>();
            d.f = item.at("f").get<std::vector<double>>();
            if (d.size_grid.size() != d.f.size()) throw SchemaError("distributions: s and f differ in length");
            d.alpha = item.value("alpha", 0.0);
            d.residual_norm = item.value("residual_norm", 0.0);
            d.roughness = item.value("roughness", 0.0);
            d.warnings = item.value("warnings", std::vector<std::string>{});
            out.push_back(std::move(d));
        }
        return out;
    });
}

namespace {

json peak_to_json(const Peak& p) {
    return {{"s", p.s},           {"height", p.height},   {"fwhm", p.fwhm},   {"s_left", p.s_left},
            {"s_right", p.s_right}, {"population", p.population}, {"index", p.index}};
}

Peak peak_from_json(const json& j) {
    Peak p;
    p.s = j.at("s").get<double>();
    p.height = j.at("height").get<double>();
    p.fwhm = j.at("fwhm").get<double>();
    p.s_left = j.at("s_left").get<double>();
    p.s_right = j.at("s_right").get<double>();
    p.population = j.at("population").get<double>();
    p.index = j.at("index").get<std::size_t>();
    return p;
}

}  // namespace

json analytics_to_json(const std::vector<AnalyticsRecord>& records) {
    json list = json::array();
    for (const auto& r : records) {
        json peaks = json::array();
        for (const auto& p : r.analytics.peaks) peaks.push_back(peak_to_json(p));
        json item = {{"source", r.source},
                     {"n", r.n},
                     {"t", r.t},
                     {"status", r.status},
                     {"message", r.message},
                     {"alpha", r.alpha},
                     {"residual_norm", r.residual_norm},
                     {"peaks", peaks},
                     {"front_97", r.analytics.front_97},
                     {"dispersion", r.analytics.dispersion},
                     {"total_mass", r.analytics.total_mass},
                     {"spectrum_second_moment", r.spectrum_second_moment},
                     {"mixture_second_moment", r.mixture_second_moment},
                     {"warnings", r.warnings}};
        if (r.gaussian) {
            item["gaussian_baseline"] = {{"s_single", r.gaussian->s_single},
                                         {"amplitude", r.gaussian->amplitude},
                                         {"residual", r.gaussian->residual},
                                         {"degenerate", r.gaussian->degenerate}};
        } else {
            item["gaussian_baseline"] = nullptr;
        }
        list.push_back(std::move(item));
    }
    return {{"schema_version", kSchemaVersion}, {"kind", "analytics"}, {"records", list}};
}

std::vector<AnalyticsRecord> analytics_from_json(const json& doc) {
    check_schema(doc, "analytics");
    return schema_guard("analytics", [&] {
        std::vector<AnalyticsRecord> out;
        for (const auto& item : doc.at("records")) {
            AnalyticsRecord r;
            r.source = item.value("source", std::string());
            r.n = item.at("n").get<int>();
            r.t = item.at("t").get<double>();
            r.status = item.at("status").get<std::string>();
            r.message = item.value("message", std::string());
            r.alpha = item.at("alpha").get<double>();
            r.residual_norm = item.at("residual_norm").get<double>();
            for (const auto& p : item.at("peaks")) r.analytics.peaks.push_back(peak_from_json(p));
            r.analytics.front_97 = item.at("front_97").get<double>();
            r.analytics.dispersion = item.at("dispersion").get<double>();
            r.analytics.total_mass = item.at("total_mass").get<double>();
            r.spectrum_second_moment = item.at("spectrum_second_moment").get<double>();
            r.mixture_second_moment = item.at("mixture_second_moment").get<double>();
            r.warnings = item.value("warnings", std::vector<std::string>{});
            if (item.contains("gaussian_baseline") && !item.at("gaussian_baseline").is_null()) {
                const auto& g = item.at("gaussian_baseline");
                r.gaussian = GaussianBaseline{g.at("s_single").get<double>(), g.at("amplitude").get<double>(),
                                              g.at("residual").get<double>(), g.at("degenerate").get<bool>()};
            }
            out.push_back(std::move(r));
        }
        return out;
    });
}

json to_json(const PowerLawFit& f) {
    json doc = {{"exponent", f.exponent},
                {"prefactor", f.prefactor},
                {"r2", f.r2},
                {"rms_log_residual", f.rms_log_residual}};
    if (f.forced_exponent) {
        doc["forced_exponent"] = *f.forced_exponent;
        doc["forced_prefactor"] = f.forced_prefactor;
        doc["forced_rms_log_residual"] = f.forced_rms_log_residual;
    }
    return doc;
}

}  // namespace mqcsim
