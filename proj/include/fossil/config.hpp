// YAML-configured synthesis jobs.  The schema is a fixed key set (unknown
// keys are errors); values are scalars, inline lists, or one level of nested
// role maps.  load() produces a validated CegisConfig; dump() writes the
// canonical form, and load(dump(cfg)) reproduces cfg.

#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fossil/cegis.hpp"

namespace fossil {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

struct YamlValue {
    std::string scalar;
    std::vector<std::string> list;
    std::map<std::string, std::string> submap;
    std::vector<std::string> submap_order;
    bool is_list = false, is_map = false;
};

inline std::string strip(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Splits "[a, b, c]" at bracket depth zero, so expression entries containing
// parentheses or nested brackets survive.
inline std::vector<std::string> split_inline_list(const std::string& text, const std::string& key) {
    std::string body = strip(text);
    if (body.size() < 2 || body.front() != '[' || body.back() != ']')
        throw ConfigError(key + ": expected an inline list [ ... ]");
    body = body.substr(1, body.size() - 2);
    std::vector<std::string> items;
    int depth = 0;
    std::string current;
    for (char c : body) {
        if (c == '[' || c == '(') ++depth;
        if (c == ']' || c == ')') --depth;
        if (c == ',' && depth == 0) {
            items.push_back(strip(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!strip(current).empty()) items.push_back(strip(current));
    return items;
}

inline std::map<std::string, YamlValue> parse_yaml(const std::string& text,
                                                   std::vector<std::string>* order = nullptr) {
    std::map<std::string, YamlValue> out;
    std::istringstream in(text);
    std::string line;
    std::string open_key;  // currently open nested map
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        if (strip(line).empty()) continue;
        const bool indented = line[0] == ' ' || line[0] == '\t';
        const std::string body = strip(line);
        const auto colon = body.find(':');
        if (colon == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'KEY: value'");
        const std::string key = strip(body.substr(0, colon));
        const std::string value = strip(body.substr(colon + 1));
        if (indented) {
            if (open_key.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": unexpected indentation");
            auto& entry = out[open_key];
            entry.is_map = true;
            if (!entry.submap.emplace(key, value).second)
                throw ConfigError(open_key + ": duplicate entry " + key);
            entry.submap_order.push_back(key);
            continue;
        }
        if (out.count(key)) throw ConfigError("duplicate key: " + key);
        if (order) order->push_back(key);
        if (value.empty()) {
            open_key = key;
            out[key] = YamlValue{};
            continue;
        }
        open_key.clear();
        YamlValue v;
        if (!value.empty() && value.front() == '[') {
            v.is_list = true;
            v.list = split_inline_list(value, key);
        } else {
            v.scalar = value;
        }
        out[key] = std::move(v);
    }
    return out;
}

inline long to_int(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (...) {
        throw ConfigError(key + ": expected an integer, got '" + s + "'");
    }
}

inline double to_real(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (...) {
        throw ConfigError(key + ": expected a number, got '" + s + "'");
    }
}

}  // namespace detail

inline CegisConfig load_config_text(const std::string& text, const std::string& name = "job") {
    static const std::set<std::string> known = {
        "N_VARS",           "SYSTEM",         "CERTIFICATE",        "TIME_DOMAIN",
        "DOMAINS",          "N_DATA",         "N_HIDDEN_NEURONS",   "ACTIVATION",
        "N_HIDDEN_NEURONS_ALT", "ACTIVATION_ALT", "CTRLAYER",       "CTRLACTIVATION",
        "VERIFIER",         "CEGIS_MAX_ITERS", "SEED",              "LEARNING_RATE",
        "MAX_EPOCHS"};
    auto yaml = detail::parse_yaml(text);
    for (const auto& [key, value] : yaml)
        if (!known.count(key)) throw ConfigError("unknown key: " + key);

    auto need = [&](const std::string& key) -> const detail::YamlValue& {
        auto it = yaml.find(key);
        if (it == yaml.end()) throw ConfigError("missing key: " + key);
        return it->second;
    };
    auto maybe = [&](const std::string& key) -> const detail::YamlValue* {
        auto it = yaml.find(key);
        return it == yaml.end() ? nullptr : &it->second;
    };
    auto int_list = [&](const detail::YamlValue& v, const std::string& key) {
        if (!v.is_list) throw ConfigError(key + ": expected a list");
        std::vector<int> out;
        for (const auto& item : v.list) out.push_back(static_cast<int>(detail::to_int(item, key)));
        return out;
    };
    auto act_list = [&](const detail::YamlValue& v, const std::string& key) {
        if (!v.is_list) throw ConfigError(key + ": expected a list");
        std::vector<Activation> out;
        for (const auto& item : v.list) {
            try {
                out.push_back(Activation::from_name(item));
            } catch (const NetError& e) {
                throw ConfigError(key + ": " + e.what());
            }
        }
        return out;
    };

    CegisConfig cfg;
    cfg.name = name;
    const int n_vars = static_cast<int>(detail::to_int(need("N_VARS").scalar, "N_VARS"));
    if (n_vars <= 0) throw ConfigError("N_VARS: must be positive");

    const auto& system = need("SYSTEM");
    if (!system.is_list) throw ConfigError("SYSTEM: expected a list of expressions");
    if (static_cast<int>(system.list.size()) != n_vars)
        throw ConfigError("SYSTEM: component count must equal N_VARS");

    // The input arity is induced by the u-indices appearing in SYSTEM.
    int n_inputs = 0;
    {
        std::set<int> u_indices;
        for (const auto& component : system.list) {
            Expr probe;
            try {
                probe = parse_expr(component, n_vars, 64);
            } catch (const ParseError& e) {
                throw ConfigError("SYSTEM: " + std::string(e.what()));
            }
            int max_state = -1, max_input = -1;
            expr_var_extent(probe, max_state, max_input);
            for (int u = 0; u <= max_input; ++u) u_indices.insert(u);
        }
        n_inputs = u_indices.empty() ? 0 : *u_indices.rbegin() + 1;
    }

    const std::string td_name = need("TIME_DOMAIN").scalar;
    TimeDomain td;
    if (td_name == "CONTINUOUS") {
        td = TimeDomain::Continuous;
    } else if (td_name == "DISCRETE") {
        td = TimeDomain::Discrete;
    } else {
        throw ConfigError("TIME_DOMAIN: expected CONTINUOUS or DISCRETE, got '" + td_name + "'");
    }
    try {
        cfg.model = DynamicalModel::parse(system.list, n_vars, n_inputs, td);
    } catch (const std::exception& e) {
        throw ConfigError("SYSTEM: " + std::string(e.what()));
    }

    try {
        cfg.kind = kind_from_name(need("CERTIFICATE").scalar);
    } catch (const CertificateError& e) {
        throw ConfigError("CERTIFICATE: " + std::string(e.what()));
    }

    const auto& domains = need("DOMAINS");
    if (!domains.is_map) throw ConfigError("DOMAINS: expected nested 'ROLE: Constructor' entries");
    for (const auto& key : domains.submap_order) {
        SetRole role;
        try {
            role = role_from_name(key);
        } catch (const DomainError& e) {
            throw ConfigError("DOMAINS: " + std::string(e.what()));
        }
        try {
            cfg.sets.sets.emplace(role, Domain::parse(domains.submap.at(key)));
        } catch (const DomainError& e) {
            throw ConfigError("DOMAINS." + key + ": " + e.what());
        }
    }

    if (const auto* nd = maybe("N_DATA")) {
        if (!nd->is_map) throw ConfigError("N_DATA: expected nested 'ROLE: count' entries");
        for (const auto& [key, value] : nd->submap) {
            const long count = detail::to_int(value, "N_DATA." + key);
            if (count < 0) throw ConfigError("N_DATA." + key + ": must be non-negative");
            cfg.n_data[role_from_name(key)] = static_cast<std::size_t>(count);
        }
    }

    cfg.hidden = int_list(need("N_HIDDEN_NEURONS"), "N_HIDDEN_NEURONS");
    cfg.activations = act_list(need("ACTIVATION"), "ACTIVATION");
    if (const auto* alt = maybe("N_HIDDEN_NEURONS_ALT"))
        cfg.hidden_alt = int_list(*alt, "N_HIDDEN_NEURONS_ALT");
    if (const auto* alt = maybe("ACTIVATION_ALT")) cfg.activations_alt = act_list(*alt, "ACTIVATION_ALT");
    if (const auto* ctrl = maybe("CTRLAYER")) cfg.ctrl_layer = int_list(*ctrl, "CTRLAYER");
    if (const auto* ctrl = maybe("CTRLACTIVATION")) cfg.ctrl_activations = act_list(*ctrl, "CTRLACTIVATION");

    try {
        cfg.verifier = solver_from_name(need("VERIFIER").scalar);
    } catch (const VerifierError& e) {
        throw ConfigError("VERIFIER: " + std::string(e.what()));
    }
    if (const auto* iters = maybe("CEGIS_MAX_ITERS"))
        cfg.max_iterations = static_cast<int>(detail::to_int(iters->scalar, "CEGIS_MAX_ITERS"));
    if (const auto* seed = maybe("SEED"))
        cfg.seed = static_cast<std::uint64_t>(detail::to_int(seed->scalar, "SEED"));
    if (const auto* lr = maybe("LEARNING_RATE"))
        cfg.train.learning_rate = detail::to_real(lr->scalar, "LEARNING_RATE");
    if (const auto* me = maybe("MAX_EPOCHS"))
        cfg.train.max_epochs = static_cast<int>(detail::to_int(me->scalar, "MAX_EPOCHS"));

    try {
        cfg.validate_for_synthesis();
    } catch (const CegisError& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

inline CegisConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string name = std::filesystem::path(path).stem().string();
    return load_config_text(buffer.str(), name);
}

inline std::string dump_config(const CegisConfig& cfg) {
    std::string out;
    out += "N_VARS: " + std::to_string(cfg.model.n_vars) + "\n";
    out += "SYSTEM: [";
    for (std::size_t i = 0; i < cfg.model.field.size(); ++i) {
        if (i) out += ", ";
        out += print_infix(cfg.model.field[i]);
    }
    out += "]\n";
    out += std::string("CERTIFICATE: ") + kind_name(cfg.kind) + "\n";
    out += std::string("TIME_DOMAIN: ") + time_domain_name(cfg.model.time_domain) + "\n";
    out += "DOMAINS:\n";
    for (const auto& [role, domain] : cfg.sets.sets)
        out += std::string("  ") + role_name(role) + ": " + domain.to_text() + "\n";
    if (!cfg.n_data.empty()) {
        out += "N_DATA:\n";
        for (const auto& [role, count] : cfg.n_data)
            out += std::string("  ") + role_name(role) + ": " + std::to_string(count) + "\n";
    }
    auto emit_int_list = [&](const char* key, const std::vector<int>& v) {
        out += std::string(key) + ": [";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ", ";
            out += std::to_string(v[i]);
        }
        out += "]\n";
    };
    auto emit_act_list = [&](const char* key, const std::vector<Activation>& v) {
        out += std::string(key) + ": [";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ", ";
            out += v[i].name();
        }
        out += "]\n";
    };
    emit_int_list("N_HIDDEN_NEURONS", cfg.hidden);
    emit_act_list("ACTIVATION", cfg.activations);
    if (!cfg.hidden_alt.empty()) {
        emit_int_list("N_HIDDEN_NEURONS_ALT", cfg.hidden_alt);
        emit_act_list("ACTIVATION_ALT", cfg.activations_alt);
    }
    if (!cfg.ctrl_layer.empty()) {
        emit_int_list("CTRLAYER", cfg.ctrl_layer);
        emit_act_list("CTRLACTIVATION", cfg.ctrl_activations);
    }
    out += std::string("VERIFIER: ") + solver_name(cfg.verifier) + "\n";
    out += "CEGIS_MAX_ITERS: " + std::to_string(cfg.max_iterations) + "\n";
    out += "SEED: " + std::to_string(cfg.seed) + "\n";
    if (cfg.train.learning_rate != TrainConfig{}.learning_rate)
        out += "LEARNING_RATE: " + shortest_decimal(cfg.train.learning_rate) + "\n";
    if (cfg.train.max_epochs != TrainConfig{}.max_epochs)
        out += "MAX_EPOCHS: " + std::to_string(cfg.train.max_epochs) + "\n";
    return out;
}

// Builds frozen candidate expressions from user-supplied infix text (the
// verify subcommand's input): V, optional W, levels, optional controller.
inline CandidateExpressions make_expressions(const CegisConfig& cfg, const std::string& V_text,
                                             const std::string& W_text,
                                             const std::vector<std::string>& controller_texts,
                                             double beta = 0.0, double gamma = 0.0) {
    CandidateExpressions ce;
    ce.beta = beta;
    ce.gamma = gamma;
    ce.V = parse_expr(V_text, cfg.model.n_vars, 0);
    DynamicalModel closed = cfg.model;
    if (!cfg.model.autonomous()) {
        if (static_cast<int>(controller_texts.size()) != cfg.model.n_inputs)
            throw ConfigError("certificate file must supply one controller expression per input");
        std::vector<Expr> u;
        for (const auto& text : controller_texts) u.push_back(parse_expr(text, cfg.model.n_vars, 0));
        VectorExpression closed_field;
        for (const auto& component : cfg.model.field)
            closed_field.push_back(substitute(component, {}, u));
        closed = DynamicalModel{cfg.model.n_vars, 0, std::move(closed_field), cfg.model.time_domain};
        ce.controller = std::move(u);
    }
    auto lie_of = [&](const Expr& f) {
        if (closed.time_domain == TimeDomain::Continuous) {
            Expr sum;
            for (int i = 0; i < closed.n_vars; ++i) {
                Expr term = ex::mul(differentiate(f, i), closed.field[i]);
                sum = sum ? ex::add(sum, term) : term;
            }
            return sum;
        }
        return ex::sub(substitute(f, closed.field, {}), f);
    };
    ce.V_lie = lie_of(ce.V);
    if (!W_text.empty()) {
        ce.W = parse_expr(W_text, cfg.model.n_vars, 0);
        ce.W_lie = lie_of(*ce.W);
    }
    return ce;
}

}  // namespace fossil
