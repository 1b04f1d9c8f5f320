#include "nfsf/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace nfsf {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& path)
{
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + path + "." + it.key() + "'");
}

double num(const json& j, const std::string& path)
{
    if (!j.is_number()) throw ConfigError("'" + path + "' must be a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& path)
{
    if (!j.is_number_integer()) throw ConfigError("'" + path + "' must be an integer");
    return j.get<int>();
}

std::string str(const json& j, const std::string& path)
{
    if (!j.is_string()) throw ConfigError("'" + path + "' must be a string");
    return j.get<std::string>();
}

std::vector<double> num_array(const json& j, const std::string& path)
{
    if (!j.is_array()) throw ConfigError("'" + path + "' must be an array");
    std::vector<double> v;
    for (const auto& e : j) {
        if (!e.is_number()) throw ConfigError("'" + path + "' must contain numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

ModulationFn parse_phi(const json& j)
{
    if (!j.is_object()) throw ConfigError("'model.phi' must be an object");
    std::string kind = str(j.at("kind"), "model.phi.kind");
    if (kind == "linear") {
        reject_unknown(j, {"kind", "gain", "offset"}, "model.phi");
        return ModulationFn::linear(num(j.value("gain", json(1.0)), "model.phi.gain"),
                                    num(j.value("offset", json(0.0)), "model.phi.offset"));
    }
    if (kind == "rectifier") {
        reject_unknown(j, {"kind", "gain", "nu"}, "model.phi");
        return ModulationFn::rectifier(num(j.value("gain", json(1.0)), "model.phi.gain"),
                                       num(j.value("nu", json(1e-2)), "model.phi.nu"));
    }
    if (kind == "sigmoid") {
        reject_unknown(j, {"kind", "amplitude", "center", "width"}, "model.phi");
        return ModulationFn::sigmoid(num(j.value("amplitude", json(1.0)), "model.phi.amplitude"),
                                     num(j.value("center", json(0.0)), "model.phi.center"),
                                     num(j.value("width", json(1.0)), "model.phi.width"));
    }
    if (kind == "tabulated") {
        reject_unknown(j, {"kind", "x", "y"}, "model.phi");
        return ModulationFn::tabulated(num_array(j.at("x"), "model.phi.x"),
                                       num_array(j.at("y"), "model.phi.y"));
    }
    throw ConfigError("'model.phi.kind' must be one of linear|rectifier|sigmoid|tabulated");
}

ConnectivityKernel parse_kernel(const json& j, const SpatialGrid& g)
{
    if (!j.is_object()) throw ConfigError("'model.kernel' must be an object");
    std::string kind = str(j.at("kind"), "model.kernel.kind");
    if (kind == "constant") {
        reject_unknown(j, {"kind", "value"}, "model.kernel");
        return ConnectivityKernel::constant(g, num(j.at("value"), "model.kernel.value"));
    }
    if (kind == "cosine") {
        reject_unknown(j, {"kind", "mean", "amp", "mode"}, "model.kernel");
        return ConnectivityKernel::cosine(g, num(j.value("mean", json(0.0)), "model.kernel.mean"),
                                          num(j.at("amp"), "model.kernel.amp"),
                                          integer(j.value("mode", json(1)), "model.kernel.mode"));
    }
    if (kind == "gaussian-diff") {
        reject_unknown(j, {"kind", "a1", "s1", "a2", "s2"}, "model.kernel");
        return ConnectivityKernel::gaussian_diff(g, num(j.at("a1"), "model.kernel.a1"),
                                                 num(j.at("s1"), "model.kernel.s1"),
                                                 num(j.at("a2"), "model.kernel.a2"),
                                                 num(j.at("s2"), "model.kernel.s2"));
    }
    if (kind == "tabulated") {
        reject_unknown(j, {"kind", "samples"}, "model.kernel");
        return ConnectivityKernel::tabulated(g, num_array(j.at("samples"), "model.kernel.samples"));
    }
    throw ConfigError("'model.kernel.kind' must be one of constant|cosine|gaussian-diff|tabulated");
}

ExternalInput parse_input(const json& j, const std::string& path)
{
    if (j.is_number()) return ExternalInput::constant(j.get<double>());
    if (!j.is_object()) throw ConfigError("'" + path + "' must be a number or object");
    std::string kind = str(j.at("kind"), path + ".kind");
    if (kind == "constant") {
        reject_unknown(j, {"kind", "value"}, path);
        return ExternalInput::constant(num(j.at("value"), path + ".value"));
    }
    if (kind == "tabulated") {
        reject_unknown(j, {"kind", "times", "values"}, path);
        return ExternalInput::tabulated(num_array(j.at("times"), path + ".times"),
                                        num_array(j.at("values"), path + ".values"));
    }
    throw ConfigError("'" + path + ".kind' must be constant|tabulated");
}

IcSpec parse_ic(const json& j)
{
    IcSpec ic;
    if (!j.is_object()) throw ConfigError("'ic' must be an object");
    std::string kind = str(j.at("kind"), "ic.kind");
    if (kind == "equilibrium") {
        reject_unknown(j, {"kind"}, "ic");
        ic.kind = IcSpec::Kind::Equilibrium;
    } else if (kind == "gaussian") {
        reject_unknown(j, {"kind", "center", "width"}, "ic");
        ic.kind = IcSpec::Kind::Gaussian;
        ic.center = num(j.value("center", json(0.0)), "ic.center");
        ic.width = num(j.value("width", json(1.0)), "ic.width");
    } else if (kind == "perturbed-equilibrium") {
        reject_unknown(j, {"kind", "mode", "eps", "relative_entropy"}, "ic");
        ic.kind = IcSpec::Kind::PerturbedEquilibrium;
        ic.mode = integer(j.value("mode", json(1)), "ic.mode");
        ic.eps = num(j.value("eps", json(1e-3)), "ic.eps");
        ic.target_re = num(j.value("relative_entropy", json(0.0)), "ic.relative_entropy");
    } else if (kind == "random-mixture") {
        reject_unknown(j, {"kind", "components"}, "ic");
        ic.kind = IcSpec::Kind::RandomMixture;
        ic.components = integer(j.value("components", json(3)), "ic.components");
    } else {
        throw ConfigError("'ic.kind' must be equilibrium|gaussian|perturbed-equilibrium|random-mixture");
    }
    return ic;
}

} // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // translate the byte offset into a line number
        size_t line = 1;
        for (size_t i = 0; i < e.byte && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        throw ConfigError(origin + ":" + std::to_string(line) + ": " + e.what());
    }

    try {
        reject_unknown(j, {"model", "grid", "solver", "stefan", "ic", "stability", "gridcell"},
                       "<root>");
        RunConfig rc;

        const json& jm = j.at("model");
        reject_unknown(jm, {"tau_c", "sigma", "L", "d", "phi", "kernel", "input"}, "model");
        rc.params.tau_c = num(jm.value("tau_c", json(1.0)), "model.tau_c");
        rc.params.sigma = num(jm.value("sigma", json(1.0)), "model.sigma");
        rc.params.L = num(jm.value("L", json(1.0)), "model.L");
        rc.params.d = integer(jm.value("d", json(1)), "model.d");

        const json& jg = j.at("grid");
        reject_unknown(jg, {"n_x", "n_s", "s_max", "phi_max_hint"}, "grid");
        int nx = integer(jg.at("n_x"), "grid.n_x");
        int ns = integer(jg.at("n_s"), "grid.n_s");
        rc.xg = SpatialGrid(rc.params.d, rc.params.L, nx);
        double smax = num(jg.value("s_max", json(0.0)), "grid.s_max");
        rc.params.phi = parse_phi(jm.at("phi"));
        rc.params.W = parse_kernel(jm.at("kernel"), rc.xg);
        rc.params.B = parse_input(jm.at("input"), "model.input");
        if (smax <= 0.0) {
            double hint = num(jg.value("phi_max_hint", json(0.0)), "grid.phi_max_hint");
            double phiB = rc.params.phi(rc.params.B(0.0));
            smax = std::max({hint, phiB, 0.0}) + 10.0 * std::sqrt(rc.params.sigma);
        }
        rc.sg = ActivityGrid(ns, smax);
        rc.params.validate();

        if (j.count("solver")) {
            const json& js = j.at("solver");
            reject_unknown(js, {"dt", "t_end", "scheme", "picard_max_iter", "picard_tol",
                                "snapshot_stride"},
                           "solver");
            rc.solver.dt = num(js.value("dt", json(1e-3)), "solver.dt");
            rc.solver.t_end = num(js.value("t_end", json(1.0)), "solver.t_end");
            std::string sc = str(js.value("scheme", json("chang-cooper")), "solver.scheme");
            if (sc == "chang-cooper") rc.solver.scheme = Scheme::ChangCooper;
            else if (sc == "upwind-implicit") rc.solver.scheme = Scheme::UpwindImplicit;
            else throw ConfigError("'solver.scheme' must be chang-cooper|upwind-implicit");
            rc.solver.picard_max_iter =
                integer(js.value("picard_max_iter", json(1)), "solver.picard_max_iter");
            rc.solver.picard_tol = num(js.value("picard_tol", json(1e-10)), "solver.picard_tol");
            rc.solver.snapshot_stride =
                integer(js.value("snapshot_stride", json(0)), "solver.snapshot_stride");
            rc.solver.validate();
        }

        if (j.count("stefan")) {
            const json& js = j.at("stefan");
            reject_unknown(js, {"dtau", "window", "picard_tol", "max_iter", "max_halvings",
                                "dz", "z_max", "t_end", "snapshot_times"},
                           "stefan");
            rc.stefan.dtau = num(js.value("dtau", json(1e-3)), "stefan.dtau");
            rc.stefan.window = num(js.value("window", json(0.1)), "stefan.window");
            rc.stefan.picard_tol = num(js.value("picard_tol", json(1e-10)), "stefan.picard_tol");
            rc.stefan.max_iter = integer(js.value("max_iter", json(200)), "stefan.max_iter");
            rc.stefan.max_halvings =
                integer(js.value("max_halvings", json(8)), "stefan.max_halvings");
            rc.stefan.dz = num(js.value("dz", json(0.02)), "stefan.dz");
            rc.stefan.z_max = num(js.value("z_max", json(0.0)), "stefan.z_max");
            rc.stefan.t_end = num(js.value("t_end", json(rc.solver.t_end)), "stefan.t_end");
            if (js.count("snapshot_times"))
                rc.stefan.snapshot_times = num_array(js.at("snapshot_times"), "stefan.snapshot_times");
            rc.stefan.validate();
        } else {
            rc.stefan.t_end = rc.solver.t_end;
        }

        rc.ic = j.count("ic") ? parse_ic(j.at("ic")) : IcSpec{};

        if (j.count("stability")) {
            const json& js = j.at("stability");
            reject_unknown(js, {"alpha", "xi", "k_max", "poincare"}, "stability");
            rc.stability.alpha = num(js.value("alpha", json(0.5)), "stability.alpha");
            rc.stability.xi = num(js.value("xi", json(0.1)), "stability.xi");
            rc.stability.k_max = integer(js.value("k_max", json(32)), "stability.k_max");
            std::string pm = str(js.value("poincare", json("conservative")), "stability.poincare");
            if (pm == "conservative") rc.stability.poincare = PoincareMethod::Conservative;
            else if (pm == "numeric") rc.stability.poincare = PoincareMethod::Numeric;
            else throw ConfigError("'stability.poincare' must be conservative|numeric");
        }

        if (j.count("gridcell")) {
            const json& jc = j.at("gridcell");
            reject_unknown(jc, {"shifts", "inputs"}, "gridcell");
            rc.has_gridcell = true;
            const json& sh = jc.at("shifts");
            if (!sh.is_array() || sh.size() != 4)
                throw ConfigError("'gridcell.shifts' must be an array of 4 grid shift vectors");
            for (const auto& e : sh) {
                auto v = num_array(e, "gridcell.shifts[]");
                if (v.size() != (size_t)rc.params.d && v.size() != 2)
                    throw ConfigError("'gridcell.shifts[]' must have d entries");
                rc.shifts.push_back({(int)std::llround(v[0]),
                                     v.size() > 1 ? (int)std::llround(v[1]) : 0});
            }
            const json& in = jc.at("inputs");
            if (!in.is_array() || in.size() != 4)
                throw ConfigError("'gridcell.inputs' must be an array of 4 inputs");
            for (size_t i = 0; i < 4; ++i)
                rc.inputs4.push_back(parse_input(in[i], "gridcell.inputs[" + std::to_string(i) + "]"));
        }

        rc.resolved = j.dump(2) + "\n";
        return rc;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
}

RunConfig parse_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

} // namespace nfsf
