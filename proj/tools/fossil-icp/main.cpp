// Standalone delta-decision solver over SMT-LIB 2 scripts.
//
// Usage: fossil-icp [--precision D] [--max-boxes N] [--timeout-s S] script.smt2
//
// Prints one of: "unsat", "sat", "delta-sat with delta = D", "unknown"; sat
// and delta-sat answers are followed by an SMT-LIB model block.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "fossil/decimal.hpp"
#include "fossil/icp/solver.hpp"

int main(int argc, char** argv) {
    using namespace fossil::icp;
    SolverOptions opts;
    opts.precision = 0;  // take the script's :precision unless overridden
    const char* path = nullptr;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--precision") == 0 && i + 1 < argc) {
            opts.precision = std::stod(argv[++i]);
        } else if (std::strcmp(argv[i], "--max-boxes") == 0 && i + 1 < argc) {
            opts.max_boxes = std::stoull(argv[++i]);
        } else if (std::strcmp(argv[i], "--timeout-s") == 0 && i + 1 < argc) {
            opts.timeout_s = std::stod(argv[++i]);
        } else if (std::strcmp(argv[i], "--help") == 0) {
            std::puts("usage: fossil-icp [--precision D] [--max-boxes N] [--timeout-s S] script.smt2");
            return 0;
        } else {
            path = argv[i];
        }
    }
    if (!path) {
        std::fprintf(stderr, "fossil-icp: no input file\n");
        return 2;
    }
    std::ifstream in(path);
    if (!in) {
        std::fprintf(stderr, "fossil-icp: cannot open %s\n", path);
        return 2;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();

    try {
        ScriptParser parser;
        Problem problem = parser.parse(buffer.str());
        if (opts.precision <= 0) opts.precision = problem.precision;
        IcpSolver solver(problem, opts);
        IcpResult result = solver.solve();
        auto print_model = [&](const std::vector<double>& model) {
            std::string out = "(model\n";
            for (std::size_t i = 0; i < problem.var_names.size(); ++i) {
                out += "  (define-fun " + problem.var_names[i] + " () Real ";
                const double v = model[i];
                if (v < 0) {
                    out += "(- " + fossil::shortest_decimal(-v) + ")";
                } else {
                    out += fossil::shortest_decimal(v);
                }
                out += ")\n";
            }
            out += ")";
            std::puts(out.c_str());
        };
        switch (result.kind) {
            case IcpResult::Kind::Unsat: std::puts("unsat"); break;
            case IcpResult::Kind::Sat:
                std::puts("sat");
                print_model(result.model);
                break;
            case IcpResult::Kind::DeltaSat:
                std::printf("delta-sat with delta = %s\n", fossil::shortest_decimal(result.delta).c_str());
                print_model(result.model);
                break;
            case IcpResult::Kind::Unknown:
                std::puts("unknown");
                std::fprintf(stderr, "fossil-icp: %s\n", result.reason.c_str());
                break;
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fossil-icp: error: %s\n", e.what());
        return 2;
    }
}
