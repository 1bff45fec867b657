#include "mfilm/config.hpp"

#include "mfilm/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace mfilm {

using Json = nlohmann::ordered_json;

namespace {

/// Typed, strict access to one object of the config document.
class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
    }

    bool has(const std::string& key) const
    {
        seen_.insert(key);
        return j_.contains(key);
    }

    const Json& at(const std::string& key) const
    {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError("missing required key '" + name(key) + "'");
        return j_.at(key);
    }

    double number(const std::string& key) const
    {
        const Json& v = at(key);
        if (!v.is_number()) throw ConfigError("'" + name(key) + "' must be a number");
        return v.get<double>();
    }

    int integer(const std::string& key) const
    {
        const Json& v = at(key);
        if (!v.is_number_integer()) throw ConfigError("'" + name(key) + "' must be an integer");
        const auto x = v.get<long long>();
        if (x < -(1LL << 30) || x > (1LL << 30)) throw ConfigError("'" + name(key) + "' is out of range");
        return static_cast<int>(x);
    }

    std::string string(const std::string& key) const
    {
        const Json& v = at(key);
        if (!v.is_string()) throw ConfigError("'" + name(key) + "' must be a string");
        return v.get<std::string>();
    }

    template <std::size_t N>
    std::array<double, N> numbers(const std::string& key) const
    {
        const Json& v = at(key);
        if (!v.is_array() || v.size() != N)
            throw ConfigError("'" + name(key) + "' must be an array of " + std::to_string(N) + " numbers");
        std::array<double, N> out{};
        for (std::size_t i = 0; i < N; ++i) {
            if (!v[i].is_number()) throw ConfigError("'" + name(key) + "' must contain numbers");
            out[i] = v[i].get<double>();
        }
        return out;
    }

    Section sub(const std::string& key) const { return Section(at(key), name(key)); }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    /// Rejects keys that were never looked up.
    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key '" + name(it.key()) + "'");
    }

private:
    const Json& j_;
    std::string path_;
    mutable std::set<std::string> seen_;
};

template <typename F>
auto as_config_error(const std::string& what, F&& f)
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

void apply_override(Json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    Json* node = &doc;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
        if (i + 1 == parts.size())
            (*node)[parts[i]] = value;
        else
            node = &(*node)[parts[i]];
    }
}

Json to_json(const RunConfig& c)
{
    Json j;
    j["physics"] = {{"N", c.physics.N}, {"Rc", c.physics.Rc}};
    Json r;
    r["mode"] = to_string(c.regime.mode);
    if (c.regime.mode == RegimeMode::stokes) r["lambda"] = c.regime.lambda;
    if (c.regime.eta) r["eta"] = *c.regime.eta;
    if (c.regime.eps) r["eps"] = *c.regime.eps;
    j["regime"] = r;
    Json rough;
    rough["kind"] = to_string(c.roughness.kind);
    rough["h0"] = c.roughness.h0;
    rough["amplitude"] = c.roughness.amplitude;
    if (c.roughness.kind == RoughnessKind::table) rough["table_path"] = c.roughness.table_path;
    rough["n"] = c.roughness.n;
    j["roughness"] = rough;
    const MacroDomain& d = c.domain;
    j["domain"] = {{"x0", d.x0}, {"x1", d.x1}, {"y0", d.y0}, {"y1", d.y1}, {"nx", d.nx}, {"ny", d.ny},
                   {"f", {d.f[0], d.f[1]}}, {"g", {d.g[0], d.g[1]}}};
    j["cell"] = {{"n2d", c.cell.n2d},
                 {"n3d", {c.cell.n3d[0], c.cell.n3d[1], c.cell.n3d[2]}},
                 {"solver_tol", c.cell.solver_tol},
                 {"max_iter", c.cell.max_iter}};
    j["output"] = {{"dir", c.output.dir}, {"formats", c.output.formats}};
    return j;
}

RunConfig from_json(const Json& doc)
{
    RunConfig c;
    const Section root(doc, "");

    const Section phys = root.sub("physics");
    c.physics.N = phys.number("N");
    c.physics.Rc = phys.number("Rc");
    phys.finish();

    const Section reg = root.sub("regime");
    c.regime.mode = as_config_error("regime.mode", [&] { return regime_mode_from_string(reg.string("mode")); });
    if (c.regime.mode == RegimeMode::stokes || reg.has("lambda")) c.regime.lambda = reg.number("lambda");
    if (c.regime.mode == RegimeMode::automatic || reg.has("eta")) c.regime.eta = reg.number("eta");
    if (c.regime.mode == RegimeMode::automatic || reg.has("eps")) c.regime.eps = reg.number("eps");
    reg.finish();

    const Section rough = root.sub("roughness");
    c.roughness.kind = as_config_error("roughness.kind",
                                       [&] { return roughness_kind_from_string(rough.string("kind")); });
    c.roughness.h0 = rough.number("h0");
    c.roughness.amplitude = rough.number("amplitude");
    if (c.roughness.kind == RoughnessKind::table || rough.has("table_path"))
        c.roughness.table_path = rough.string("table_path");
    c.roughness.n = rough.integer("n");
    rough.finish();

    const Section dom = root.sub("domain");
    c.domain.x0 = dom.number("x0");
    c.domain.x1 = dom.number("x1");
    c.domain.y0 = dom.number("y0");
    c.domain.y1 = dom.number("y1");
    c.domain.nx = dom.integer("nx");
    c.domain.ny = dom.integer("ny");
    const auto f = dom.numbers<2>("f");
    const auto g = dom.numbers<2>("g");
    c.domain.f = Eigen::Vector2d(f[0], f[1]);
    c.domain.g = Eigen::Vector2d(g[0], g[1]);
    dom.finish();

    const Section cell = root.sub("cell");
    c.cell.n2d = cell.integer("n2d");
    const Json& n3d = cell.at("n3d");
    if (!n3d.is_array() || n3d.size() != 3 || !std::all_of(n3d.begin(), n3d.end(), [](const Json& v) {
            return v.is_number_integer();
        }))
        throw ConfigError("'cell.n3d' must be an array of 3 integers");
    for (int i = 0; i < 3; ++i) c.cell.n3d[i] = n3d[i].get<int>();
    c.cell.solver_tol = cell.number("solver_tol");
    c.cell.max_iter = cell.integer("max_iter");
    cell.finish();

    const Section out = root.sub("output");
    c.output.dir = out.string("dir");
    const Json& formats = out.at("formats");
    if (!formats.is_array()) throw ConfigError("'output.formats' must be an array of strings");
    c.output.formats.clear();
    for (const Json& v : formats) {
        if (!v.is_string()) throw ConfigError("'output.formats' must be an array of strings");
        c.output.formats.push_back(v.get<std::string>());
    }
    out.finish();

    root.finish();
    return c;
}

} // namespace

RoughnessField RoughnessSpec::build() const
{
    if (kind != RoughnessKind::table) return make_roughness(kind, h0, amplitude, n);
    RoughnessField field = load_roughness_table(table_path);
    if (field.n() != n)
        throw ValidationError("roughness table '" + table_path + "' has " + std::to_string(field.n())
                              + " rows but roughness.n = " + std::to_string(n));
    return field;
}

bool OutputSettings::wants(const std::string& format) const
{
    return std::find(formats.begin(), formats.end(), format) != formats.end();
}

void RunConfig::validate() const
{
    as_config_error("physics", [&] { physics.validate(); });
    as_config_error("regime", [&] { regime.validate(); });
    as_config_error("domain", [&] { domain.validate(); });
    if (roughness.n < 4) throw ConfigError("'roughness.n' must be at least 4");
    if (roughness.kind != RoughnessKind::table) {
        if (!(roughness.amplitude >= 0.0) || !(roughness.h0 > roughness.amplitude) || !std::isfinite(roughness.h0))
            throw ConfigError("roughness requires h0 > amplitude >= 0");
    } else if (roughness.table_path.empty()) {
        throw ConfigError("'roughness.table_path' is required for kind 'table'");
    } else if (cell.n2d != roughness.n) {
        throw ConfigError("table roughness requires cell.n2d = roughness.n");
    }
    if (cell.n2d < 4) throw ConfigError("'cell.n2d' must be at least 4");
    for (int n : cell.n3d)
        if (n < 8) throw ConfigError("'cell.n3d' entries must be at least 8");
    if (!(cell.solver_tol > 0.0 && cell.solver_tol <= 1e-4))
        throw ConfigError("'cell.solver_tol' must lie in (0, 1e-4]");
    if (cell.max_iter < 1) throw ConfigError("'cell.max_iter' must be positive");
    if (output.dir.empty()) throw ConfigError("'output.dir' must not be empty");
    std::set<std::string> seen;
    for (const std::string& f : output.formats) {
        if (f != "csv" && f != "vtk") throw ConfigError("unknown output format '" + f + "'");
        if (!seen.insert(f).second) throw ConfigError("duplicate output format '" + f + "'");
    }
}

RunConfig parse_config(const std::string& json_text, const std::vector<std::string>& overrides)
{
    Json doc = Json::parse(json_text, nullptr, false, true);
    if (doc.is_discarded()) throw ConfigError("configuration is not valid JSON");
    for (const std::string& o : overrides) apply_override(doc, o);
    RunConfig c = from_json(doc);
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open configuration '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), overrides);
}

std::string serialize_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

} // namespace mfilm
