#include "mvsde/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mvsde/io_util.hpp"

namespace mvsde {

namespace {

struct RawConfig {
    // section -> key -> value
    std::map<std::string, std::map<std::string, std::string>> sections;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

RawConfig tokenize(const std::string& text) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            raw.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        if (section.empty()) throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
        if (!raw.sections[section].emplace(key, value).second)
            throw ConfigError("duplicate key '" + key + "' in section [" + section + "]");
    }
    return raw;
}

class SectionReader {
public:
    SectionReader(RawConfig& raw, const std::string& name) : name_(name) {
        auto it = raw.sections.find(name);
        if (it != raw.sections.end()) entries_ = &it->second;
    }

    std::optional<std::string> take(const std::string& key) {
        if (!entries_) return std::nullopt;
        auto it = entries_->find(key);
        if (it == entries_->end()) return std::nullopt;
        consumed_.insert(key);
        return it->second;
    }

    double take_double(const std::string& key, double fallback, double lo, double hi) {
        const auto v = take(key);
        if (!v) return fallback;
        return parse_double(key, *v, lo, hi);
    }

    std::optional<double> take_optional_double(const std::string& key, double lo, double hi) {
        const auto v = take(key);
        if (!v || *v == "auto") return std::nullopt;
        return parse_double(key, *v, lo, hi);
    }

    long take_int(const std::string& key, long fallback, long lo, long hi) {
        const auto v = take(key);
        if (!v) return fallback;
        try {
            std::size_t pos = 0;
            const long n = std::stol(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument("");
            if (n < lo || n > hi) throw std::out_of_range("");
            return n;
        } catch (const std::exception&) {
            throw ConfigError(locate(key) + ": expected integer in [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "], got '" + *v + "'");
        }
    }

    uint64_t take_u64(const std::string& key, uint64_t fallback) {
        const auto v = take(key);
        if (!v) return fallback;
        try {
            std::size_t pos = 0;
            const unsigned long long n = std::stoull(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument("");
            return n;
        } catch (const std::exception&) {
            throw ConfigError(locate(key) + ": expected unsigned integer, got '" + *v + "'");
        }
    }

    std::vector<double> take_double_list(const std::string& key) {
        const auto v = take(key);
        std::vector<double> out;
        if (!v) return out;
        std::istringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            out.push_back(parse_double(key, item, -1e300, 1e300));
        }
        return out;
    }

    void finish(const RawConfig& raw) const {
        auto it = raw.sections.find(name_);
        if (it == raw.sections.end()) return;
        for (const auto& [key, value] : it->second)
            if (!consumed_.contains(key))
                throw ConfigError("unknown key '" + key + "' in section [" + name_ + "]");
    }

    std::string locate(const std::string& key) const { return "[" + name_ + "] " + key; }

    double parse_double(const std::string& key, const std::string& v, double lo, double hi) {
        try {
            std::size_t pos = 0;
            const double x = std::stod(v, &pos);
            if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument("");
            if (x < lo || x > hi) throw std::out_of_range("");
            return x;
        } catch (const std::exception&) {
            std::ostringstream msg;
            msg << locate(key) << ": expected number in [" << lo << ", " << hi << "], got '" << v << "'";
            throw ConfigError(msg.str());
        }
    }

private:
    std::string name_;
    std::map<std::string, std::string>* entries_ = nullptr;
    std::set<std::string> consumed_;
};

const std::map<std::string, BuiltinKernel> kKernelNames = {
    {"biot_savart_3d", BuiltinKernel::biot_savart_3d}, {"biot_savart_2d", BuiltinKernel::biot_savart_2d},
    {"riesz", BuiltinKernel::riesz},                   {"green", BuiltinKernel::green},
    {"zero", BuiltinKernel::zero},
};

const std::map<std::string, Omega0Kind> kOmegaNames = {
    {"lamb_oseen", Omega0Kind::lamb_oseen},
    {"gaussian_blob", Omega0Kind::gaussian_blob},
    {"zero", Omega0Kind::zero},
    {"point_vortex", Omega0Kind::point_vortex},
};

template <class T>
T parse_enum(const std::map<std::string, T>& names, const std::string& where, const std::string& v) {
    auto it = names.find(v);
    if (it == names.end()) {
        std::string options;
        for (const auto& [k, _] : names) options += (options.empty() ? "" : ", ") + k;
        throw ConfigError(where + ": unknown value '" + v + "' (expected one of: " + options + ")");
    }
    return it->second;
}

std::string kernel_name_str(BuiltinKernel k) {
    for (const auto& [name, v] : kKernelNames)
        if (v == k) return name;
    return "custom";
}

std::string omega_name_str(Omega0Kind k) {
    for (const auto& [name, v] : kOmegaNames)
        if (v == k) return name;
    return "?";
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RawConfig raw = tokenize(text);
    static const std::set<std::string> known = {"kernel", "omega0", "grids", "solver", "constants", "tolerances"};
    for (const auto& [name, _] : raw.sections)
        if (!known.contains(name)) throw ConfigError("unknown section [" + name + "]");

    RunConfig cfg;

    SectionReader kernel(raw, "kernel");
    cfg.dimension = static_cast<int>(kernel.take_int("dimension", 2, 1, 3));
    if (auto v = kernel.take("name")) cfg.kernel_name = parse_enum(kKernelNames, kernel.locate("name"), *v);
    cfg.kernel_gamma = kernel.take_double("gamma", 0.0, 0.0, 3.0);
    if (auto v = kernel.take("normalization")) {
        if (*v == "quarter_pi")
            cfg.normalization = KernelNormalization::quarter_pi;
        else if (*v == "unnormalized")
            cfg.normalization = KernelNormalization::unnormalized;
        else
            throw ConfigError(kernel.locate("normalization") + ": expected quarter_pi or unnormalized");
    }
    if (auto v = kernel.take("delta")) {
        cfg.delta = *v == "auto" ? 0.0 : kernel.parse_double("delta", *v, 1e-12, 1e6);
    }
    kernel.finish(raw);

    SectionReader omega(raw, "omega0");
    if (auto v = omega.take("type")) cfg.omega0_kind = parse_enum(kOmegaNames, omega.locate("type"), *v);
    cfg.circulation = omega.take_double("circulation", 1.0, -1e6, 1e6);
    cfg.t0 = omega.take_double("t0", 1.0, 1e-9, 1e9);
    cfg.amplitude = omega.take_double("amplitude", 1.0, -1e6, 1e6);
    cfg.sigma = omega.take_double("sigma", 1.0, 1e-9, 1e6);
    {
        Vec c(cfg.dimension);
        c[0] = omega.take_double("center_x", 0.0, -1e6, 1e6);
        if (cfg.dimension >= 2) c[1] = omega.take_double("center_y", 0.0, -1e6, 1e6);
        if (cfg.dimension >= 3) c[2] = omega.take_double("center_z", 0.0, -1e6, 1e6);
        cfg.center = c;
    }
    if (auto v = omega.take("support_radius"))
        cfg.support_radius = *v == "auto" ? 0.0 : omega.parse_double("support_radius", *v, 1e-9, 1e6);
    omega.finish(raw);

    SectionReader grids(raw, "grids");
    cfg.box_radius = grids.take_double("box_radius", 3.0, 1e-9, 1e6);
    cfg.h = grids.take_double("h", 0.25, 1e-9, 1e6);
    cfg.T = grids.take_double("T", 0.1, 0.0, 1e6);
    cfg.dt_grid = grids.take_double("dt_grid", 0.025, 1e-12, 1e6);
    cfg.recovery_box_radius = grids.take_double("recovery_box_radius", 0.0, 0.0, 1e6);
    cfg.recovery_h = grids.take_double("recovery_h", 0.0, 0.0, 1e6);
    cfg.snapshot_times = grids.take_double_list("snapshot_times");
    grids.finish(raw);

    SectionReader solver(raw, "solver");
    cfg.nu = solver.take_double("nu", 0.5, 1e-12, 1e6);
    cfg.dt = solver.take_double("dt", 0.0125, 1e-12, 1e6);
    cfg.epsilon = solver.take_double("epsilon", 0.25, 1e-9, 1e6);
    cfg.n_copies = static_cast<int>(solver.take_int("n_copies", 1000, 1, 100000000));
    cfg.paths_per_point = static_cast<int>(solver.take_int("paths_per_point", 100, 1, 100000000));
    cfg.bound_paths = static_cast<int>(solver.take_int("bound_paths", 20000, 100, 100000000));
    cfg.kde_bandwidth_mult = solver.take_double("kde_bandwidth_mult", 1.0, 1e-6, 1e6);
    cfg.seed = solver.take_u64("seed", 1);
    solver.finish(raw);

    SectionReader constants(raw, "constants");
    cfg.overrides.q = constants.take_optional_double("q", 1.0 + 1e-12, 1e6);
    cfg.overrides.kappa = constants.take_optional_double("kappa", 0.0, 1e12);
    cfg.overrides.alpha = constants.take_optional_double("alpha", 1.0 + 1e-12, 1e6);
    cfg.overrides.C_beta = constants.take_optional_double("c_beta", 0.0, 1e300);
    constants.finish(raw);

    SectionReader tol(raw, "tolerances");
    cfg.tol_fp = tol.take_double("tol_fp", 0.005, 1e-15, 1e6);
    cfg.max_iter = static_cast<int>(tol.take_int("max_iter", 8, 1, 10000));
    tol.finish(raw);

    // cross-field validation
    if (cfg.kernel_name == BuiltinKernel::biot_savart_2d && cfg.dimension != 2)
        throw ConfigError("[kernel] biot_savart_2d requires dimension = 2");
    if (cfg.kernel_name == BuiltinKernel::biot_savart_3d && cfg.dimension != 3)
        throw ConfigError("[kernel] biot_savart_3d requires dimension = 3");
    if (cfg.kernel_name == BuiltinKernel::riesz && cfg.kernel_gamma >= cfg.dimension)
        throw ConfigError("[kernel] riesz requires gamma < dimension");
    if (cfg.omega0_kind == Omega0Kind::lamb_oseen && cfg.dimension != 2)
        throw ConfigError("[omega0] lamb_oseen requires dimension = 2");
    const double ratio = 2.0 * cfg.box_radius / cfg.h;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
        throw ConfigError("[grids] 2*box_radius must be an integer multiple of h");
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

SingularKernel RunConfig::make_kernel() const {
    return make_builtin_kernel(kernel_name, dimension, kernel_gamma, normalization, effective_delta());
}

VorticityField RunConfig::make_omega0() const {
    switch (omega0_kind) {
        case Omega0Kind::lamb_oseen:
            return lamb_oseen_vorticity(circulation, t0, nu, support_radius);
        case Omega0Kind::gaussian_blob:
            return gaussian_blob_vorticity(dimension, amplitude, sigma, center, support_radius);
        case Omega0Kind::zero:
            return zero_vorticity(dimension);
        case Omega0Kind::point_vortex:
            throw ConfigError("point_vortex has no bounded density; only `simulate` supports it");
    }
    throw ConfigError("unreachable omega0 kind");
}

StructureConstants RunConfig::structure_constants() const {
    const SingularKernel k = make_kernel();
    const VorticityField w = make_omega0();
    return make_structure_constants(k.C0, w.C1, w.Cinf, k.gamma1, dimension, overrides);
}

std::string canonical_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "[kernel]\n";
    out << "dimension = " << cfg.dimension << "\n";
    out << "name = " << kernel_name_str(cfg.kernel_name) << "\n";
    out << "gamma = " << fmt17(cfg.kernel_gamma) << "\n";
    out << "normalization = "
        << (cfg.normalization == KernelNormalization::quarter_pi ? "quarter_pi" : "unnormalized") << "\n";
    out << "delta = " << (cfg.delta > 0 ? fmt17(cfg.delta) : "auto") << "\n";
    out << "[omega0]\n";
    out << "type = " << omega_name_str(cfg.omega0_kind) << "\n";
    out << "circulation = " << fmt17(cfg.circulation) << "\n";
    out << "t0 = " << fmt17(cfg.t0) << "\n";
    out << "amplitude = " << fmt17(cfg.amplitude) << "\n";
    out << "sigma = " << fmt17(cfg.sigma) << "\n";
    out << "center_x = " << fmt17(cfg.center[0]) << "\n";
    if (cfg.dimension >= 2) out << "center_y = " << fmt17(cfg.center[1]) << "\n";
    if (cfg.dimension >= 3) out << "center_z = " << fmt17(cfg.center[2]) << "\n";
    out << "support_radius = " << (cfg.support_radius > 0 ? fmt17(cfg.support_radius) : "auto") << "\n";
    out << "[grids]\n";
    out << "box_radius = " << fmt17(cfg.box_radius) << "\n";
    out << "h = " << fmt17(cfg.h) << "\n";
    out << "T = " << fmt17(cfg.T) << "\n";
    out << "dt_grid = " << fmt17(cfg.dt_grid) << "\n";
    out << "recovery_box_radius = " << fmt17(cfg.recovery_box_radius) << "\n";
    out << "recovery_h = " << fmt17(cfg.recovery_h) << "\n";
    if (!cfg.snapshot_times.empty()) {
        out << "snapshot_times =";
        for (std::size_t i = 0; i < cfg.snapshot_times.size(); ++i)
            out << (i ? "," : " ") << fmt17(cfg.snapshot_times[i]);
        out << "\n";
    }
    out << "[solver]\n";
    out << "nu = " << fmt17(cfg.nu) << "\n";
    out << "dt = " << fmt17(cfg.dt) << "\n";
    out << "epsilon = " << fmt17(cfg.epsilon) << "\n";
    out << "n_copies = " << cfg.n_copies << "\n";
    out << "paths_per_point = " << cfg.paths_per_point << "\n";
    out << "bound_paths = " << cfg.bound_paths << "\n";
    out << "kde_bandwidth_mult = " << fmt17(cfg.kde_bandwidth_mult) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "[constants]\n";
    out << "q = " << (cfg.overrides.q ? fmt17(*cfg.overrides.q) : "auto") << "\n";
    out << "kappa = " << (cfg.overrides.kappa ? fmt17(*cfg.overrides.kappa) : "auto") << "\n";
    out << "alpha = " << (cfg.overrides.alpha ? fmt17(*cfg.overrides.alpha) : "auto") << "\n";
    out << "c_beta = " << (cfg.overrides.C_beta ? fmt17(*cfg.overrides.C_beta) : "auto") << "\n";
    out << "[tolerances]\n";
    out << "tol_fp = " << fmt17(cfg.tol_fp) << "\n";
    out << "max_iter = " << cfg.max_iter << "\n";
    return out.str();
}

}  // namespace mvsde
