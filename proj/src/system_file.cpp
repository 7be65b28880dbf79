#include "modalkit/system_file.hpp"

#include "modalkit/models.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace modalkit {

namespace {

using nlohmann::json;

double param_or(const std::map<std::string, double>& params, std::initializer_list<const char*> keys,
                double fallback) {
    for (const char* k : keys)
        if (auto it = params.find(k); it != params.end()) return it->second;
    return fallback;
}

MechSystem build_from_builtin(const json& doc, const std::map<std::string, double>& params) {
    const std::string id = doc.at("builtin").get<std::string>();
    models::ModelParams mp = id == "quintuple_pendulum" ? models::quintuple_defaults() : models::ModelParams{};
    mp.mass = param_or(params, {"m", "mass"}, mp.mass);
    mp.inertia = param_or(params, {"I", "inertia"}, mp.inertia);
    mp.length = param_or(params, {"d", "l", "length"}, mp.length);
    mp.stiffness = param_or(params, {"k", "K", "stiffness"}, mp.stiffness);
    mp.gravity = param_or(params, {"g", "gravity"}, mp.gravity);
    mp.links = static_cast<int>(param_or(params, {"links"}, mp.links));
    if (id == "quintuple_pendulum") {
        if (doc.contains("n")) mp.links = doc.at("n").get<int>();
        return models::build_quintuple_pendulum(mp);
    }
    const auto pot = models::potential_from_name(doc.value("potential", std::string("s1")));
    MechSystem sys = models::build_builtin(id, mp, pot);
    if (doc.contains("n") && doc.at("n").get<int>() != sys.dof())
        throw ParseError("\"n\" does not match builtin '" + id + "'");
    return sys;
}

} // namespace

SystemFile parse_system_file(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte == 0 ? 0 : e.byte - 1);
    }
    try {
        if (!doc.is_object()) throw ParseError("system file must be a JSON object");
        std::map<std::string, double> params;
        if (doc.contains("params"))
            for (const auto& [k, v] : doc.at("params").items()) params[k] = v.get<double>();

        std::optional<MechSystem> sys;
        if (doc.contains("builtin")) {
            sys.emplace(build_from_builtin(doc, params));
        } else if (doc.contains("V_expr")) {
            if (!doc.contains("M_expr")) throw ParseError("\"M_expr\" is required with \"V_expr\"");
            const int n = doc.at("n").get<int>();
            std::vector<std::vector<std::string>> m;
            for (const auto& row : doc.at("M_expr")) {
                std::vector<std::string> r;
                for (const auto& cell : row)
                    r.push_back(cell.is_string() ? cell.get<std::string>() : cell.dump());
                m.push_back(std::move(r));
            }
            sys.emplace(make_expression_system(doc.value("name", std::string("expression")), n,
                                               doc.at("V_expr").get<std::string>(), m, params));
        } else {
            throw ParseError("system file needs either \"builtin\" or \"V_expr\"");
        }

        const int n = sys->dof();
        Vec guess = Vec::Zero(n);
        if (doc.contains("equilibrium_guess")) {
            const auto& g = doc.at("equilibrium_guess");
            if (static_cast<int>(g.size()) != n) throw ParseError("\"equilibrium_guess\" must have n entries");
            for (int i = 0; i < n; ++i) guess[i] = g.at(i).get<double>();
        }
        std::optional<std::vector<std::string>> phi;
        if (doc.contains("phi")) {
            phi.emplace(doc.at("phi").get<std::vector<std::string>>());
            if (static_cast<int>(phi->size()) != n) throw ParseError("\"phi\" must have n entries");
        }
        return SystemFile{std::move(*sys), std::move(guess), std::move(phi), std::move(params)};
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid system file: ") + e.what());
    }
}

SystemFile load_system_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open system file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_system_file(ss.str());
}

} // namespace modalkit
