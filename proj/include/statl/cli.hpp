#pragma once

// Command-line front end shared by the statl tool and the test suite.
//
// Every subcommand reads one program file and emits a single report
// object on stdout: {"command", "digest", "payload", "pass" (where a
// verdict applies), "wall_time_ms"}.  Reports are byte-identical across
// runs once wall_time_ms is stripped.  Diagnostics (parse, type, plan,
// io, budget) go to stderr as JSON objects.
//
// Exit codes: 0 success, 1 malformed input (parse/type/plan/io),
// 2 state-budget exhaustion, 3 verification failure.

#include "corpus.hpp"
#include "ergodicity.hpp"
#include "eval.hpp"
#include "parser.hpp"
#include "printer.hpp"
#include "transforms.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace statl::cli {

using Json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitBudget = 2;
constexpr int kExitVerifyFailed = 3;

struct RunConfig {
    std::string command;  // eval | compile | approx | verify | check-eliminability
    std::string file;
    std::string steps;  // "" | "N" | "s0=N,s1=M,..."
    std::size_t state_budget = 10000;
    unsigned long m_max = 8;
    std::string format = "json";  // json | text
    bool list_sites = false;      // verify only
    std::string out_file;         // compile only
};

// A report with pass == false is a verification failure; everything else
// that reaches the report stage succeeded.
inline int exit_code_for_report(const Json& report) {
    if (report.contains("pass") && report["pass"].is_boolean() && !report["pass"].get<bool>())
        return kExitVerifyFailed;
    return kExitOk;
}

namespace detail {

inline Json measure_json(const FiniteMeasure& m) {
    Json j;
    j["carrier"] = ty_to_string(m.carrier);
    Json support = Json::array();
    for (const auto& e : m.support)
        support.push_back(Json::array({value_to_string(e.first), rat_to_string(e.second)}));
    j["support"] = std::move(support);
    return j;
}

inline void render_text(const Json& j, std::ostream& out, const std::string& indent) {
    if (j.is_object()) {
        for (const auto& [key, val] : j.items()) {
            if (val.is_object() || (val.is_array() && !val.empty() && !val[0].is_string())) {
                out << indent << key << ":\n";
                render_text(val, out, indent + "  ");
            } else if (val.is_array()) {
                out << indent << key << ":";
                for (const auto& e : val) out << " " << (e.is_string() ? e.get<std::string>() : e.dump());
                out << "\n";
            } else if (val.is_string()) {
                out << indent << key << ": " << val.get<std::string>() << "\n";
            } else {
                out << indent << key << ": " << val.dump() << "\n";
            }
        }
    } else if (j.is_array()) {
        for (const auto& e : j.items()) {
            out << indent << "-\n";
            render_text(e.value(), out, indent + "  ");
        }
    } else {
        out << indent << j.dump() << "\n";
    }
}

inline int emit_error(std::ostream& err, Json diagnostic, int code) {
    err << diagnostic.dump(2) << "\n";
    return code;
}

inline Json type_error_json(const TypeError& e) {
    Json j;
    j["error"] = "type";
    j["rule"] = e.rule;
    j["path"] = e.path;
    j["expected"] = e.expected;
    j["found"] = e.found;
    return j;
}

inline Json parse_error_json(const ParseDiagnostic& d) {
    Json j;
    j["error"] = "parse";
    j["line"] = d.line;
    j["column"] = d.column;
    j["message"] = d.message;
    j["expected"] = d.expected;
    return j;
}

// --steps: either one count broadcast to every site, or label=N pairs.
inline IterationPlan parse_steps(const std::string& steps, const std::vector<StatSite>& sites) {
    IterationPlan plan;
    if (steps.empty()) {
        if (sites.empty()) return plan;
        throw PlanError("--steps is required when the program has stat sites");
    }
    if (steps.find('=') == std::string::npos) {
        std::optional<Rational> n = rat_from_string(steps);
        if (!n || *n < 0 || denominator(*n) != 1)
            throw PlanError("--steps expects a step count or label=N pairs");
        unsigned long count = static_cast<unsigned long>(numerator(*n));
        for (const auto& s : sites) plan[s.label] = count;
        return plan;
    }
    std::stringstream ss(steps);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 >= item.size())
            throw PlanError("--steps expects label=N pairs separated by commas");
        std::string label = item.substr(0, eq);
        std::optional<Rational> n = rat_from_string(item.substr(eq + 1));
        if (!n || *n < 0 || denominator(*n) != 1)
            throw PlanError("bad step count for site " + label);
        plan[label] = static_cast<unsigned long>(numerator(*n));
    }
    return plan;
}

inline Json site_cert_json(const std::string& label, const SiteCert& c) {
    Json j;
    j["label"] = label;
    j["reachable"] = c.reachable;
    j["certified"] = c.certified;
    j["verdict"] = c.verdict;
    j["C"] = rat_to_string(c.C);
    j["rho"] = rat_to_string(c.rho);
    j["m"] = c.m;
    j["delta_m"] = rat_to_string(c.delta_m);
    j["environments"] = c.env_count;
    j["max_states"] = c.max_states;
    return j;
}

}  // namespace detail

inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    using Clock = std::chrono::steady_clock;
    const auto started = Clock::now();

    std::ifstream in(cfg.file);
    if (!in) {
        Json j;
        j["error"] = "io";
        j["message"] = "cannot open file " + cfg.file;
        return detail::emit_error(err, j, kExitInputError);
    }
    std::stringstream buf;
    buf << in.rdbuf();

    ParseResult parsed = parse_term_text(buf.str());
    if (std::holds_alternative<ParseDiagnostic>(parsed))
        return detail::emit_error(err, detail::parse_error_json(std::get<ParseDiagnostic>(parsed)),
                                  kExitInputError);
    TermPtr term = std::get<TermPtr>(parsed);

    Json payload;
    std::optional<bool> pass;
    EvalLimits lim{cfg.state_budget};
    try {
        KindTy kt = kind_check(term);
        if (cfg.command == "eval") {
            if (kt.kind == Kind::Det)
                throw TypeError("eval-prob", "", "a probabilistic program", "det term");
            FiniteMeasure m = eval_prob(term, Env{}, Context{}, lim);
            payload = detail::measure_json(m);
            payload["mass"] = rat_to_string(mass(m));
            payload["kind"] = kind_name(kt.kind);
        } else if (cfg.command == "compile") {
            if (kt.kind != Kind::PureProb)
                throw TypeError("program", "", "a purely probabilistic program", kind_name(kt.kind));
            TermPtr compiled = compile(term);
            std::string surface = print_term(compiled);
            payload["surface"] = surface;
            payload["digest"] = term_digest(compiled);
            if (!cfg.out_file.empty()) {
                std::ofstream of(cfg.out_file);
                if (!of) {
                    Json j;
                    j["error"] = "io";
                    j["message"] = "cannot write file " + cfg.out_file;
                    return detail::emit_error(err, j, kExitInputError);
                }
                of << surface << "\n";
            }
        } else if (cfg.command == "approx") {
            if (kt.kind != Kind::PureProb)
                throw TypeError("program", "", "a purely probabilistic program", kind_name(kt.kind));
            IterationPlan plan = detail::parse_steps(cfg.steps, stat_sites(term));
            TermPtr approxed = approx_all(term, plan);
            payload["surface"] = print_term(approxed);
            EvalOutcome res = eval_closed(approxed, lim);
            Json m = detail::measure_json(res.measure);
            payload["carrier"] = m["carrier"];
            payload["support"] = m["support"];
            payload["mass"] = rat_to_string(mass(res.measure));
            payload["kind"] = kind_name(res.kind);
        } else if (cfg.command == "verify") {
            if (kt.kind != Kind::PureProb)
                throw TypeError("program", "", "a purely probabilistic program", kind_name(kt.kind));
            TermPtr compiled = compile(term);
            std::vector<StatSite> sites = stat_sites(compiled);
            if (cfg.list_sites) {
                SiteCertMap certs = certify_sites(compiled, cfg.m_max, lim);
                Json arr = Json::array();
                for (const auto& s : sites) arr.push_back(detail::site_cert_json(s.label, certs.at(s.label)));
                payload["sites"] = std::move(arr);
            } else {
                IterationPlan plan = detail::parse_steps(cfg.steps, sites);
                SiteCertMap certs = certify_sites(compiled, cfg.m_max, lim);
                Json uncertified = Json::array();
                for (const auto& s : sites)
                    if (!certs.at(s.label).certified)
                        uncertified.push_back(detail::site_cert_json(s.label, certs.at(s.label)));
                if (!uncertified.empty()) {
                    Json j;
                    j["error"] = "uncertifiable";
                    j["sites"] = std::move(uncertified);
                    return detail::emit_error(err, j, kExitVerifyFailed);
                }
                BoundReport rep = approximation_bound(compiled, plan, certs, lim);
                Json arr = Json::array();
                for (const auto& s : rep.sites) {
                    Json sj;
                    sj["label"] = s.label;
                    sj["C"] = rat_to_string(s.C);
                    sj["rho"] = rat_to_string(s.rho);
                    sj["N"] = s.N;
                    sj["contribution"] = rat_to_string(s.contribution);
                    arr.push_back(std::move(sj));
                }
                payload["sites"] = std::move(arr);
                payload["total"] = rat_to_string(rep.total);
                payload["empirical_tv"] = rat_to_string(rep.empirical_tv);
                payload["sound"] = rep.sound;
                pass = rep.sound;
            }
        } else if (cfg.command == "check-eliminability") {
            if (kt.kind != Kind::PureProb)
                throw TypeError("program", "", "a purely probabilistic program", kind_name(kt.kind));
            TermPtr compiled = compile(term);
            FiniteMeasure source = eval_prob(term, Env{}, Context{}, lim);
            FiniteMeasure target = eval_prob(compiled, Env{}, Context{}, lim);
            Rational d = tv(source, target);
            payload["tv"] = rat_to_string(d);
            payload["compiled_digest"] = term_digest(compiled);
            pass = d == 0;
        } else {
            Json j;
            j["error"] = "usage";
            j["message"] = "unknown command " + cfg.command;
            return detail::emit_error(err, j, kExitInputError);
        }
    } catch (const TypeError& e) {
        return detail::emit_error(err, detail::type_error_json(e), kExitInputError);
    } catch (const PlanError& e) {
        Json j;
        j["error"] = "plan";
        j["message"] = e.what();
        return detail::emit_error(err, j, kExitInputError);
    } catch (const StateBudgetExceeded& e) {
        Json j;
        j["error"] = "budget";
        j["budget"] = e.budget;
        return detail::emit_error(err, j, kExitBudget);
    }

    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started);
    Json report;
    report["command"] = cfg.command;
    report["digest"] = term_digest(term);
    report["payload"] = std::move(payload);
    if (pass) report["pass"] = *pass;
    report["wall_time_ms"] = elapsed.count();
    if (cfg.format == "text")
        detail::render_text(report, out, "");
    else
        out << report.dump(2) << "\n";
    return exit_code_for_report(report);
}

}  // namespace statl::cli
