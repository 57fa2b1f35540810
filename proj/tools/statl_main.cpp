// statl: exact interpreter, norm-eliminating compiler, and convergence
// verifier for a first-order probabilistic language with finite support.

#include <statl/statl.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{
        "statl: exact interpreter, norm-eliminating compiler, and convergence verifier\n"
        "for a first-order probabilistic language over finite-support measures"};
    app.require_subcommand(1);

    statl::cli::RunConfig cfg;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("file", cfg.file, "program file (.statl)")->required();
        sub->add_option("--state-budget", cfg.state_budget,
                        "largest reachable state space explored per stat site")
            ->capture_default_str();
        sub->add_option("--format", cfg.format, "report format: json or text")
            ->check(CLI::IsMember({"json", "text"}))
            ->capture_default_str();
    };

    CLI::App* eval = app.add_subcommand("eval", "evaluate a program to its exact measure");
    add_common(eval);

    CLI::App* compile =
        app.add_subcommand("compile", "eliminate norm and score, emitting the compiled program");
    add_common(compile);
    compile->add_option("-o,--output", cfg.out_file, "also write the compiled program to FILE");

    CLI::App* approx = app.add_subcommand(
        "approx", "replace each stat site by a finite kernel iteration and evaluate");
    add_common(approx);
    approx->add_option("--steps", cfg.steps,
                       "iteration counts: one number for every site, or s0=N,s1=M,...");

    CLI::App* verify = app.add_subcommand(
        "verify", "certify per-site convergence and bound the approximation error");
    add_common(verify);
    verify->add_option("--steps", cfg.steps,
                       "iteration counts: one number for every site, or s0=N,s1=M,...");
    verify->add_option("--m-max", cfg.m_max,
                       "largest kernel power probed for a contractive Dobrushin coefficient")
        ->capture_default_str();
    verify->add_flag("--list-sites", cfg.list_sites,
                     "only list stat sites with their certificates");

    CLI::App* check = app.add_subcommand(
        "check-eliminability", "compare a program against its compilation in total variation");
    add_common(check);

    CLI11_PARSE(app, argc, argv);

    cfg.command = app.get_subcommands().front()->get_name();
    return statl::cli::run(cfg, std::cout, std::cerr);
}
