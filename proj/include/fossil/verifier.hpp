// Drives external SMT solvers (Z3, CVC5, dReal) and the bundled fossil-icp
// binary over SMT-LIB 2 script files, one subprocess per constraint group.
// Subprocess-only integration: identical surface for every backend and full
// crash isolation.

#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fossil/certificates.hpp"
#include "fossil/smt2.hpp"

namespace fossil {

struct VerifierError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SolverKind { Z3, Cvc5, Dreal, Icp };

inline const char* solver_name(SolverKind k) {
    switch (k) {
        case SolverKind::Z3: return "Z3";
        case SolverKind::Cvc5: return "CVC5";
        case SolverKind::Dreal: return "DREAL";
        case SolverKind::Icp: return "ICP";
    }
    return "?";
}

inline SolverKind solver_from_name(std::string_view name) {
    for (auto k : {SolverKind::Z3, SolverKind::Cvc5, SolverKind::Dreal, SolverKind::Icp})
        if (name == solver_name(k)) return k;
    throw VerifierError("unknown verifier: " + std::string(name));
}

// Delta-complete backends accept transcendental terms; Z3/CVC5 are
// polynomial-only.
inline bool solver_is_delta(SolverKind k) { return k == SolverKind::Dreal || k == SolverKind::Icp; }

struct SolverBackend {
    SolverKind kind = SolverKind::Icp;
    std::string executable;  // resolved path or bare name (PATH lookup)
    double timeout_s = 180.0;
    double delta = 1e-4;
};

namespace detail {

inline const char* solver_env_var(SolverKind k) {
    switch (k) {
        case SolverKind::Z3: return "FOSSIL_Z3";
        case SolverKind::Cvc5: return "FOSSIL_CVC5";
        case SolverKind::Dreal: return "FOSSIL_DREAL";
        case SolverKind::Icp: return "FOSSIL_ICP";
    }
    return "";
}

inline const char* solver_default_exe(SolverKind k) {
    switch (k) {
        case SolverKind::Z3: return "z3";
        case SolverKind::Cvc5: return "cvc5";
        case SolverKind::Dreal: return "dreal";
        case SolverKind::Icp: return "fossil-icp";
    }
    return "";
}

inline bool on_path(const std::string& name) {
    if (name.find('/') != std::string::npos) return ::access(name.c_str(), X_OK) == 0;
    const char* path = std::getenv("PATH");
    if (!path) return false;
    std::stringstream ss(path);
    std::string dir;
    while (std::getline(ss, dir, ':')) {
        if (dir.empty()) continue;
        if (::access((dir + "/" + name).c_str(), X_OK) == 0) return true;
    }
    return false;
}

inline std::optional<std::string> self_directory() {
    char buf[4096];
    const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
    if (n <= 0) return std::nullopt;
    buf[n] = '\0';
    return std::filesystem::path(buf).parent_path().string();
}

}  // namespace detail

// Locates the backend executable: explicit override, then the FOSSIL_*
// environment variable, then (for the bundled solver) next to the current
// binary, then PATH.  Empty result means unavailable.
inline std::optional<std::string> resolve_solver_executable(SolverKind kind,
                                                            const std::string& override_exe = "") {
    if (!override_exe.empty())
        return detail::on_path(override_exe) ? std::optional(override_exe) : std::nullopt;
    if (const char* env = std::getenv(detail::solver_env_var(kind)); env && *env)
        return detail::on_path(env) ? std::optional(std::string(env)) : std::nullopt;
    if (kind == SolverKind::Icp) {
        if (auto dir = detail::self_directory()) {
            for (const char* rel : {"/fossil-icp", "/../tools/fossil-icp"}) {
                std::string candidate = *dir + rel;
                if (::access(candidate.c_str(), X_OK) == 0) return candidate;
            }
        }
    }
    const std::string name = detail::solver_default_exe(kind);
    return detail::on_path(name) ? std::optional(name) : std::nullopt;
}

inline SolverBackend make_backend(SolverKind kind, const std::string& override_exe = "",
                                  double timeout_s = 180.0, double delta = 1e-4) {
    auto exe = resolve_solver_executable(kind, override_exe);
    if (!exe)
        throw VerifierError(std::string(solver_name(kind)) + " executable not found (set " +
                            detail::solver_env_var(kind) + " or install it on PATH)");
    return SolverBackend{kind, *exe, timeout_s, delta};
}

// ---------------------------------------------------------------------------
// Capability gating

inline void collect_transcendental(const Expr& e, std::vector<std::string>& found) {
    switch (e->op) {
        case ExprOp::Sin: found.push_back("sin"); break;
        case ExprOp::Cos: found.push_back("cos"); break;
        case ExprOp::Exp: found.push_back("exp"); break;
        case ExprOp::Sigmoid: found.push_back("sigmoid"); break;
        case ExprOp::Tanh: found.push_back("tanh"); break;
        case ExprOp::Softplus: found.push_back("softplus"); break;
        default: break;
    }
    if (e->a) collect_transcendental(e->a, found);
    if (e->b) collect_transcendental(e->b, found);
}

inline void check_capability(SolverKind kind, const ConstraintGroup& group) {
    if (solver_is_delta(kind)) return;
    std::vector<std::string> found;
    std::vector<const FormulaNode*> stack{group.formula.get()};
    while (!stack.empty()) {
        const FormulaNode* f = stack.back();
        stack.pop_back();
        if (f->kind == FormulaNode::Kind::Atom) {
            collect_transcendental(f->lhs, found);
            collect_transcendental(f->rhs, found);
        } else {
            for (const auto& c : f->children) stack.push_back(c.get());
        }
    }
    if (!found.empty())
        throw VerifierError("group '" + group.name + "' uses " + found.front() + ", which " +
                            solver_name(kind) + " cannot decide; use DREAL or ICP");
}

// ---------------------------------------------------------------------------
// Script emission

inline std::string emit_script(SolverKind kind, const ConstraintGroup& group, int n_vars) {
    check_capability(kind, group);
    std::string out;
    switch (kind) {
        case SolverKind::Z3:
            out += "(set-option :produce-models true)\n(set-option :pp.decimal true)\n";
            break;
        case SolverKind::Cvc5: out += "(set-option :produce-models true)\n"; break;
        case SolverKind::Dreal:
        case SolverKind::Icp: break;
    }
    out += "(set-logic QF_NRA)\n";
    for (int i = 0; i < n_vars; ++i) out += "(declare-const x" + std::to_string(i) + " Real)\n";
    out += "(assert " + to_smtlib_shared(group.formula) + ")\n";
    out += "(check-sat)\n(get-model)\n";
    return out;
}

// ---------------------------------------------------------------------------
// Subprocess plumbing

struct ProcessResult {
    int exit_code = -1;
    bool timed_out = false;
    bool spawn_failed = false;
    std::string out, err;
};

inline ProcessResult run_process(const std::vector<std::string>& argv, double timeout_s) {
    ProcessResult result;
    int out_pipe[2], err_pipe[2];
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) throw VerifierError("pipe() failed");
    const pid_t pid = fork();
    if (pid < 0) throw VerifierError("fork() failed");
    if (pid == 0) {
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        close(err_pipe[1]);
        std::vector<char*> cargv;
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        std::perror("execvp");
        _exit(127);
    }
    close(out_pipe[1]);
    close(err_pipe[1]);
    fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);
    fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    bool out_open = true, err_open = true;
    char buf[4096];
    auto drain = [&](int fd, std::string& sink, bool& open_flag) {
        for (;;) {
            const ssize_t n = read(fd, buf, sizeof(buf));
            if (n > 0) {
                sink.append(buf, static_cast<std::size_t>(n));
            } else if (n == 0) {
                open_flag = false;
                return;
            } else {
                return;  // EAGAIN
            }
        }
    };
    int status = 0;
    bool exited = false;
    for (;;) {
        pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
        poll(fds, 2, 50);
        if (out_open) drain(out_pipe[0], result.out, out_open);
        if (err_open) drain(err_pipe[0], result.err, err_open);
        if (!exited) {
            const pid_t w = waitpid(pid, &status, WNOHANG);
            if (w == pid) exited = true;
        }
        if (exited && !out_open && !err_open) break;
        if (exited && result.out.empty() && result.err.empty() && !out_open && !err_open) break;
        if (std::chrono::steady_clock::now() > deadline && !exited) {
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            result.timed_out = true;
            drain(out_pipe[0], result.out, out_open);
            drain(err_pipe[0], result.err, err_open);
            break;
        }
        if (exited) {
            // Process gone; one final drain pass then stop.
            drain(out_pipe[0], result.out, out_open);
            drain(err_pipe[0], result.err, err_open);
            break;
        }
    }
    close(out_pipe[0]);
    close(err_pipe[0]);
    if (!result.timed_out) {
        result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        result.spawn_failed = result.exit_code == 127;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Output parsing

enum class Verdict { Unsat, Sat, DeltaSat, Timeout, SolverError };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Unsat: return "UNSAT";
        case Verdict::Sat: return "SAT";
        case Verdict::DeltaSat: return "DELTA_SAT";
        case Verdict::Timeout: return "TIMEOUT";
        case Verdict::SolverError: return "SOLVER_ERROR";
    }
    return "?";
}

struct VerdictGroupResult {
    std::string group;
    Verdict verdict = Verdict::SolverError;
    std::vector<std::vector<double>> points;  // model points, x0..x{n-1}
    double wall_time_s = 0.0;
    std::string condition_id;
    std::string data_key;
    std::string raw;  // solver transcript (stdout + stderr)
};

namespace detail {

// Numeric s-expression evaluator for model values: decimals, (- x),
// (/ p q), and z3's trailing '?' on truncated decimals.
struct ModelValueParser {
    std::string_view text;
    std::size_t pos = 0;

    void ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    double value() {
        ws();
        if (pos < text.size() && text[pos] == '(') {
            ++pos;
            ws();
            std::size_t start = pos;
            while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
                   text[pos] != '(' && text[pos] != ')')
                ++pos;
            const std::string op(text.substr(start, pos - start));
            std::vector<double> args;
            ws();
            while (pos < text.size() && text[pos] != ')') {
                args.push_back(value());
                ws();
            }
            if (pos < text.size()) ++pos;  // ')'
            if (op == "-") return args.size() == 1 ? -args[0] : args[0] - args[1];
            if (op == "/") return args[0] / args[1];
            if (op == "+") {
                double s = 0;
                for (double a : args) s += a;
                return s;
            }
            if (op == "*") {
                double p = 1;
                for (double a : args) p *= a;
                return p;
            }
            throw VerifierError("unsupported model value operator: " + op);
        }
        std::size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
               text[pos] != ')' && text[pos] != '(')
            ++pos;
        std::string token(text.substr(start, pos - start));
        if (!token.empty() && token.back() == '?') token.pop_back();  // z3 pp.decimal marker
        return std::stod(token);
    }
};

// Extracts (define-fun xN () Real VALUE) entries.
inline bool parse_define_funs(const std::string& text, int n_vars, std::vector<double>& point) {
    point.assign(n_vars, 0.0);
    bool any = false;
    std::size_t pos = 0;
    while ((pos = text.find("(define-fun", pos)) != std::string::npos) {
        std::size_t p = pos + 11;
        while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
        std::size_t name_start = p;
        while (p < text.size() && !std::isspace(static_cast<unsigned char>(text[p])) && text[p] != '(')
            ++p;
        const std::string name = text.substr(name_start, p - name_start);
        std::size_t real_pos = text.find("Real", p);
        if (real_pos == std::string::npos) break;
        ModelValueParser vp{text, real_pos + 4};
        double v = 0;
        try {
            v = vp.value();
        } catch (...) {
            pos = p;
            continue;
        }
        if (name.size() >= 2 && name[0] == 'x') {
            bool digits = std::all_of(name.begin() + 1, name.end(),
                                      [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
            if (digits) {
                const int idx = std::stoi(name.substr(1));
                if (idx >= 0 && idx < n_vars) {
                    point[idx] = v;
                    any = true;
                }
            }
        }
        pos = vp.pos;
    }
    return any;
}

// dReal-style model lines: "x0 : [ -1.25, -1.249999 ]"; midpoints.
inline bool parse_interval_lines(const std::string& text, int n_vars, std::vector<double>& point) {
    point.assign(n_vars, 0.0);
    bool any = false;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string name = line.substr(0, colon);
        name.erase(std::remove_if(name.begin(), name.end(), ::isspace), name.end());
        if (name.size() < 2 || name[0] != 'x' ||
            !std::all_of(name.begin() + 1, name.end(),
                         [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
            continue;
        const int idx = std::stoi(name.substr(1));
        if (idx < 0 || idx >= n_vars) continue;
        const auto lb = line.find('[', colon);
        const auto comma = line.find(',', lb);
        const auto rb = line.find(']', lb);
        if (lb == std::string::npos || rb == std::string::npos) continue;
        try {
            if (comma != std::string::npos && comma < rb) {
                const double lo = std::stod(line.substr(lb + 1, comma - lb - 1));
                const double hi = std::stod(line.substr(comma + 1, rb - comma - 1));
                point[idx] = 0.5 * (lo + hi);
            } else {
                point[idx] = std::stod(line.substr(lb + 1, rb - lb - 1));
            }
            any = true;
        } catch (...) {
            continue;
        }
    }
    return any;
}

inline std::string first_token_line(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        const auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos) continue;
        return line.substr(start);
    }
    return "";
}

}  // namespace detail

// Runs one script through the backend and classifies the outcome.
inline VerdictGroupResult run_solver(const SolverBackend& backend, const std::string& script,
                                     int n_vars, const std::string& script_path_hint = "") {
    static std::atomic<std::uint64_t> counter{0};
    VerdictGroupResult result;
    const auto t0 = std::chrono::steady_clock::now();

    std::filesystem::path path;
    if (!script_path_hint.empty()) {
        path = script_path_hint;
    } else {
        path = std::filesystem::temp_directory_path() /
               ("fossil-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)) + ".smt2");
    }
    {
        std::ofstream file(path);
        file << script;
    }

    std::vector<std::string> argv{backend.executable};
    if (backend.kind == SolverKind::Dreal) {
        argv.push_back("--precision");
        argv.push_back(shortest_decimal(backend.delta));
        argv.push_back("--model");
    } else if (backend.kind == SolverKind::Icp) {
        argv.push_back("--precision");
        argv.push_back(shortest_decimal(backend.delta));
    }
    argv.push_back(path.string());

    ProcessResult proc = run_process(argv, backend.timeout_s);
    if (script_path_hint.empty()) std::filesystem::remove(path);

    result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.raw = proc.out + (proc.err.empty() ? "" : "\n[stderr]\n" + proc.err);
    if (proc.timed_out) {
        result.verdict = Verdict::Timeout;
        return result;
    }
    if (proc.spawn_failed) {
        result.verdict = Verdict::SolverError;
        result.raw = "failed to launch '" + backend.executable + "': " + proc.err;
        return result;
    }

    const std::string head = detail::first_token_line(proc.out);
    std::vector<double> point;
    if (head == "unsat") {
        result.verdict = Verdict::Unsat;
    } else if (head == "sat") {
        result.verdict = Verdict::Sat;
        if (detail::parse_define_funs(proc.out, n_vars, point) ||
            detail::parse_interval_lines(proc.out, n_vars, point))
            result.points.push_back(point);
    } else if (head.rfind("delta-sat", 0) == 0) {
        result.verdict = Verdict::DeltaSat;
        if (detail::parse_define_funs(proc.out, n_vars, point) ||
            detail::parse_interval_lines(proc.out, n_vars, point))
            result.points.push_back(point);
    } else {
        // "unknown" and anything unparseable count as solver errors; unknown
        // is never proof.
        result.verdict = Verdict::SolverError;
    }
    if ((result.verdict == Verdict::Sat || result.verdict == Verdict::DeltaSat) &&
        result.points.empty()) {
        result.verdict = Verdict::SolverError;
        result.raw += "\n[fossil] sat answer without a parseable model";
    }
    return result;
}

struct VerifyOptions {
    bool short_circuit = false;       // stop at the first non-UNSAT group
    int max_parallel = 0;             // 0 = one thread per group
    std::string script_dir;           // when set, scripts/transcripts persist here
};

// Runs all groups; results are merged deterministically in group order.
inline std::vector<VerdictGroupResult> verify_groups(const std::vector<ConstraintGroup>& groups,
                                                     int n_vars, const SolverBackend& backend,
                                                     const VerifyOptions& opts = {}) {
    if (groups.empty()) throw VerifierError("malformed certificate: no constraint groups");
    std::vector<VerdictGroupResult> results(groups.size());

    auto run_one = [&](std::size_t i) {
        const auto& g = groups[i];
        std::string hint;
        if (!opts.script_dir.empty()) {
            std::filesystem::create_directories(opts.script_dir);
            hint = opts.script_dir + "/" + g.name + ".smt2";
        }
        VerdictGroupResult r;
        try {
            const std::string script = emit_script(backend.kind, g, n_vars);
            r = run_solver(backend, script, n_vars, hint);
        } catch (const std::exception& e) {
            r.verdict = Verdict::SolverError;
            r.raw = e.what();
        }
        r.group = g.name;
        r.condition_id = g.condition_id;
        r.data_key = g.data_key;
        if (!opts.script_dir.empty()) {
            std::ofstream(opts.script_dir + "/" + g.name + ".out") << verdict_name(r.verdict) << "\n"
                                                                   << r.raw;
        }
        results[i] = std::move(r);
    };

    if (opts.short_circuit) {
        for (std::size_t i = 0; i < groups.size(); ++i) {
            run_one(i);
            if (results[i].verdict != Verdict::Unsat) {
                results.resize(i + 1);
                break;
            }
        }
        return results;
    }

    const std::size_t pool =
        opts.max_parallel > 0 ? static_cast<std::size_t>(opts.max_parallel) : groups.size();
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t nworkers = std::min(pool, groups.size());
    for (std::size_t w = 0; w < nworkers; ++w)
        workers.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= groups.size()) return;
                run_one(i);
            }
        });
    for (auto& t : workers) t.join();
    return results;
}

// Whole-candidate verification: build the groups and run them all.
inline std::vector<VerdictGroupResult> verify_candidate(const SynthesisProblem& problem,
                                                        const CandidateExpressions& ce,
                                                        const SolverBackend& backend,
                                                        const VerifyOptions& opts = {}) {
    return verify_groups(problem.constraint_groups(ce), problem.model.n_vars, backend, opts);
}

inline bool all_unsat(const std::vector<VerdictGroupResult>& results) {
    for (const auto& r : results)
        if (r.verdict != Verdict::Unsat) return false;
    return !results.empty();
}

}  // namespace fossil
