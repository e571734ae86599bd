#pragma once

// Command-line front end. Subcommands wrap the library modules thinly:
//   run     -- run the inductor and write snapshot + CSVs
//   audit   -- exploitation audit of any market against any trader
//   eval    -- evaluate a feature program against a history CSV
//   worlds  -- enumerate worlds propositionally consistent with D_n
//   report  -- coherence | calibration | conditional | expectation
// Exit codes: 0 success, 1 runtime/assertion error, 2 usage/config error.

#include "CLI11.hpp"

#include "lia/diagnostics.hpp"
#include "lia/inductor.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

namespace lia {

namespace cli {

inline std::string dir_of(const std::string& path) {
    auto p = std::filesystem::path(path).parent_path();
    return p.empty() ? "." : p.string();
}

inline coherence_decls decls_from_config(session& s) {
    coherence_decls decls;
    for (const auto& t : split_list(s.cfg().get("diagnostics.tracked")))
        decls.tracked.push_back(s.parse_sent(t));
    for (const auto& pr : split_list(s.cfg().get("diagnostics.exclusive"))) {
        std::string body = pr;
        if (!body.empty() && body.front() == '(' && body.back() == ')')
            body = body.substr(1, body.size() - 2);
        auto comma = body.find(',');
        if (comma == std::string::npos)
            throw config_error("diagnostics.exclusive entries look like (phi, psi)");
        decls.exclusive.emplace_back(s.parse_sent(body.substr(0, comma)),
                                     s.parse_sent(body.substr(comma + 1)));
    }
    return decls;
}

inline int cmd_run(const std::string& config_path, int horizon, const std::string& out_dir) {
    config cfg = config::parse_file(config_path);
    session s(cfg, dir_of(config_path));
    std::filesystem::create_directories(out_dir);
    std::string snap = (std::filesystem::path(out_dir) / "snapshot.lia").string();
    try {
        s.run_to(horizon);
    } catch (...) {
        s.save_snapshot(snap, /*final_flag=*/false);
        throw;
    }
    s.save_snapshot(snap, true);
    int digits = s.cfg().get_int("output.decimal_digits", 9);
    {
        std::ofstream out(std::filesystem::path(out_dir) / "prices.csv");
        export_csv(out, s.arena(), s.atoms(), s.prices(), digits);
    }
    {
        audit_trace firm = exploitation_audit_firm(s.catalog(), s.arena(), s.process(),
                                                   s.prices(), horizon, s.firm_opts(),
                                                   s.atom_cap());
        std::ofstream out(std::filesystem::path(out_dir) / "firm_audit.csv");
        export_csv(out, firm, digits);
    }
    std::cout << "committed " << s.prices().size() << " days; snapshot " << snap << "\n";
    return 0;
}

inline int cmd_audit(const std::string& market_path, const std::string& trader_spec,
                     const std::string& process_path, int horizon, const std::string& out_path,
                     int atom_cap) {
    bool is_csv = market_path.size() > 4 &&
                  market_path.substr(market_path.size() - 4) == ".csv";
    loaded_market mkt = is_csv ? load_market_csv(market_path)
                               : load_market_snapshot(market_path);
    if (horizon <= 0) horizon = static_cast<int>(mkt.hist.size());

    std::shared_ptr<deductive_process> proc;
    if (!process_path.empty()) {
        std::ifstream in(process_path);
        if (!in) throw config_error("cannot open process file: " + process_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        proc = std::make_shared<scripted_process>(buf.str(), mkt.arena, mkt.atoms);
    } else {
        proc = mkt.frozen();
    }

    catalog_context ctx{&mkt.arena, &mkt.atoms, proc, dir_of(market_path), atom_cap};
    std::vector<trader> traders = make_traders(trader_spec, ctx);
    trader_catalog cat(std::move(traders));
    // a multi-trader spec (the coherence four-pack) audits the k=1 trader
    audit_trace trace = exploitation_audit(
        mkt.arena, [&](int n) { return cat.strategy(1, n); }, mkt.hist, *proc, horizon, atom_cap);

    if (out_path.empty()) {
        export_csv(std::cout, trace);
    } else {
        std::ofstream out(out_path);
        export_csv(out, trace);
    }
    return 0;
}

inline int cmd_eval(const std::string& program_path, const std::string& history_path) {
    std::ifstream in(program_path);
    if (!in) throw config_error("cannot open program file: " + program_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    loaded_market mkt;
    if (!history_path.empty()) mkt = load_market_csv(history_path);
    expr_ptr prog = parse_feature_program(buf.str(), mkt.arena, mkt.atoms, std::nullopt,
                                          /*allow_new_atoms=*/true);
    std::cout << eval_feature(prog, mkt.hist).str() << "\n";
    return 0;
}

inline int cmd_worlds(const std::string& process_path, int day, const std::string& atoms_list,
                      int atom_cap) {
    sentence_arena arena;
    atom_table atoms;
    std::vector<atom_id> scope;
    for (const auto& name : split_list(atoms_list, ','))
        scope.push_back(atoms.declare(name));
    std::ifstream in(process_path);
    if (!in) throw config_error("cannot open process file: " + process_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    scripted_process proc(buf.str(), arena, atoms);
    std::vector<world> ws = plausible_worlds(arena, proc.day(day), scope, atom_cap);
    if (ws.empty()) {
        std::cout << "(no plausible worlds)\n";
        return 0;
    }
    for (const world& w : ws) {
        for (std::size_t i = 0; i < w.atoms.size(); ++i)
            std::cout << (i ? " " : "") << atoms.label(w.atoms[i]) << "="
                      << (((w.bits >> i) & 1u) ? 1 : 0);
        std::cout << "\n";
    }
    return 0;
}

inline int cmd_report(const std::string& snapshot_path, const std::string& kind,
                      const std::string& config_path, const std::string& given,
                      const std::string& family, int day, const rat& band_lo, const rat& band_hi,
                      const rat& delta, const std::string& out_path, int horizon) {
    std::ostream* outp = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        outp = &file;
    }

    if (kind == "coherence" || kind == "calibration") {
        if (config_path.empty()) throw config_error("--config is required for " + kind);
        config cfg = config::parse_file(config_path);
        auto s = session::load_snapshot(cfg, dir_of(config_path), snapshot_path);
        if (kind == "coherence") {
            export_csv(*outp, coherence_report(s->arena(), s->prices(), s->process(),
                                               decls_from_config(*s), s->atom_cap()));
            return 0;
        }
        std::vector<sent_id> diag = s->diagonal_sentences();
        if (diag.empty()) throw config_error("diagnostics.diagonal is empty");
        int audit_horizon = static_cast<int>(s->prices().size());
        if (horizon <= 0 || horizon > audit_horizon) horizon = audit_horizon;
        auto ratios = calibration_stats(
            s->arena(), s->prices(),
            [&](int i) { return diag[static_cast<std::size_t>(i - 1) % diag.size()]; },
            s->process(), band_lo, band_hi, [&](int) { return delta; }, horizon, audit_horizon,
            s->atom_cap());
        csv_writer w(*outp);
        for (int i = 1; i <= horizon; ++i)
            w.row(i, "calibration", ratios[static_cast<std::size_t>(i) - 1]);
        return 0;
    }

    loaded_market mkt = load_market_snapshot(snapshot_path);
    if (kind == "conditional") {
        if (given.empty()) throw config_error("--given <sentence> is required");
        sent_id psi = parse_sentence(given, mkt.arena, mkt.atoms);
        history cond = conditional_market(mkt.arena, mkt.hist, psi);
        export_csv(*outp, mkt.arena, mkt.atoms, cond);
        return 0;
    }
    if (kind == "expectation") {
        if (family.empty()) throw config_error("--family <s0; s1; ...> is required");
        std::vector<sent_id> thresholds;
        for (const auto& t : split_list(family))
            thresholds.push_back(parse_sentence(t, mkt.arena, mkt.atoms));
        if (day <= 0) day = static_cast<int>(mkt.hist.size());
        *outp << expectation(mkt.hist, day, thresholds).str() << "\n";
        return 0;
    }
    throw config_error("unknown report kind: " + kind);
}

} // namespace cli

inline int cli_main(int argc, char** argv) {
    CLI::App app{"lia - logical-induction market engine"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker cap (does not affect outputs)");

    std::string config_path, out_dir = "out";
    int horizon = 10;
    auto* run = app.add_subcommand("run", "run the inductor");
    run->add_option("--config", config_path, "run configuration")->required();
    run->add_option("--horizon", horizon, "days to commit");
    run->add_option("--out", out_dir, "output directory");

    std::string market_path, trader_spec, process_path, audit_out;
    int audit_horizon = 0, atom_cap = default_atom_cap;
    auto* audit = app.add_subcommand("audit", "exploitation audit of a market");
    audit->add_option("--market", market_path, "snapshot or market csv")->required();
    audit->add_option("--trader", trader_spec, "catalog-style trader spec")->required();
    audit->add_option("--process", process_path, "scripted process file");
    audit->add_option("--horizon", audit_horizon, "audit horizon (default: whole market)");
    audit->add_option("--out", audit_out, "output csv (default: stdout)");
    audit->add_option("--atom-cap", atom_cap, "world-enumeration atom cap");

    std::string program_path, history_path;
    auto* eval = app.add_subcommand("eval", "evaluate a feature program");
    eval->add_option("--program", program_path, "feature program file")->required();
    eval->add_option("--history", history_path, "history csv (optional)");

    std::string worlds_process, worlds_atoms;
    int worlds_day = 1;
    auto* worlds = app.add_subcommand("worlds", "enumerate plausible worlds");
    worlds->add_option("--process", worlds_process, "scripted process file")->required();
    worlds->add_option("--day", worlds_day, "day n");
    worlds->add_option("--atoms", worlds_atoms, "comma-separated atom universe")->required();
    worlds->add_option("--atom-cap", atom_cap, "world-enumeration atom cap");

    std::string snap_path, kind, report_config, given, family, report_out;
    std::string band_lo = "2/5", band_hi = "3/5", delta = "1/20";
    int report_day = 0, report_horizon = 0;
    auto* report = app.add_subcommand("report", "diagnostics over a snapshot");
    report->add_option("--snapshot", snap_path, "snapshot path")->required();
    report->add_option("--kind", kind, "coherence|calibration|conditional|expectation")
        ->required();
    report->add_option("--config", report_config, "run configuration (coherence/calibration)");
    report->add_option("--given", given, "conditioning sentence (conditional)");
    report->add_option("--family", family, "threshold sentences (expectation)");
    report->add_option("--day", report_day, "day (expectation; default: last)");
    report->add_option("--horizon", report_horizon,
                       "diagonal prefix length (calibration; default: whole market)");
    report->add_option("--band-lo", band_lo, "calibration band lower edge");
    report->add_option("--band-hi", band_hi, "calibration band upper edge");
    report->add_option("--delta", delta, "calibration indicator width");
    report->add_option("--out", report_out, "output csv (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) return cli::cmd_run(config_path, horizon, out_dir);
        if (*audit)
            return cli::cmd_audit(market_path, trader_spec, process_path, audit_horizon,
                                  audit_out, atom_cap);
        if (*eval) return cli::cmd_eval(program_path, history_path);
        if (*worlds) return cli::cmd_worlds(worlds_process, worlds_day, worlds_atoms, atom_cap);
        if (*report) {
            auto lo = rat::parse(band_lo), hi = rat::parse(band_hi), dl = rat::parse(delta);
            if (!lo || !hi || !dl) throw config_error("bad rational flag");
            return cli::cmd_report(snap_path, kind, report_config, given, family, report_day,
                                   *lo, *hi, *dl, report_out, report_horizon);
        }
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace lia
