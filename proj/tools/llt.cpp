// llt: capture, analyze and refine loader request logs.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "llt/capture.hpp"
#include "llt/error.hpp"
#include "llt/family_log.hpp"
#include "llt/pipeline.hpp"
#include "llt/service.hpp"
#include "llt/syngen.hpp"

using nlohmann::json;
using namespace llt;

namespace {

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  bool quiet = false;
  CLI::Option* seed_opt = nullptr;
};

void note(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

PipelineConfig base_config(const Globals& g) {
  PipelineConfig c;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw Error("cannot open config " + g.config_path);
    try {
      c = PipelineConfig::from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw ParseError("config " + g.config_path + ": " + e.what());
    }
  }
  if (g.seed_opt && g.seed_opt->count()) c.seed = g.seed;
  return c;
}

ReductionOrder parse_order(const std::string& s) {
  if (s == "sample_then_dedup") return ReductionOrder::SampleThenDedup;
  if (s == "dedup_then_sample") return ReductionOrder::DedupThenSample;
  throw ParseError("unknown order " + s);
}

// Blocks until SIGINT or SIGTERM. Must run before any thread starts so the
// signals stay masked everywhere else.
sigset_t block_stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

void wait_for_stop(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
}

std::string emit_tree(const AnalysisSession& s, const std::string& format) {
  if (format == "newick") return s.tree->to_newick() + "\n";
  if (format == "dot") return s.tree->to_dot();
  if (format == "json") return s.tree->to_json().dump(2) + "\n";
  if (format == "csv") {
    std::ostringstream out;
    s.tree->write_merge_csv(out);
    return out.str();
  }
  throw Unsupported("unknown tree format " + format);
}

std::vector<std::string> display_names(const FamilySet& fs, const AnalysisSession& s) {
  std::vector<std::string> names;
  for (const auto& f : fs.families()) names.push_back(f.name.empty() ? suggest_family_name(f, s.templates, s.tokens) : f.name);
  return names;
}

void print_families(const FamilyLog& log, const AnalysisSession& s) {
  std::cout << "revision " << log.revision() << '\n';
  if (!log.initialized()) {
    std::cout << "families not initialized\n";
    return;
  }
  auto names = display_names(log.state(), s);
  const auto& fams = log.state().families();
  for (std::size_t i = 0; i < fams.size(); ++i) {
    const auto& f = fams[i];
    std::cout << f.id << '\t' << (f.name.empty() ? "(" + names[i] + "?)" : f.name) << '\t' << f.members.size()
              << " logs\tanchor " << f.anchor << (f.kept ? "\tkept" : "") << '\t' << render(s.templates.at(f.anchor))
              << '\n';
  }
  for (const auto& e : log.state().lineage_edges()) {
    std::cout << "edge " << e.from << " -> " << e.to;
    for (const auto& c : e.changes) std::cout << "  " << change_symbol(c.kind) << ' ' << c.label;
    std::cout << '\n';
  }
}

LineageChange parse_change_arg(const std::string& text) {
  for (auto kind : {ChangeKind::Added, ChangeKind::Removed, ChangeKind::Modified}) {
    auto sym = change_symbol(kind);
    if (text.starts_with(sym)) {
      std::string label = text.substr(sym.size());
      while (!label.empty() && label.front() == ' ') label.erase(0, 1);
      return {kind, label};
    }
  }
  throw ParseError("lineage change must start with +, - or ±: " + text);
}

ReplayScript load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open script " + path);
  try {
    auto j = json::parse(in);
    ReplayScript s;
    s.username = j.value("username", s.username);
    s.password = j.value("password", s.password);
    for (const auto& l : j.at("lines")) s.lines.push_back(unescape_bytes(l.get<std::string>()));
    return s;
  } catch (const json::exception& e) {
    throw ParseError("script " + path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loader request log clustering and family refinement"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
  g.seed_opt = app.add_option("--seed", g.seed, "Seed for anything random");
  app.add_flag("--quiet", g.quiet, "Only print requested output");
  // Global options may follow the subcommand ("syngen ... --seed 7").
  app.fallthrough();

  // capture
  auto* capture = app.add_subcommand("capture", "Run the telnet listener or replay a scripted session");
  capture->require_subcommand(1);
  auto* listen = capture->add_subcommand("listen", "Accept telnet sessions until interrupted");
  std::string bind_addr = "0.0.0.0:2323", out_dir, banner_file, responses_file;
  std::size_t max_bytes = 256 * 1024;
  long max_seconds = 120;
  listen->add_option("--bind", bind_addr, "host:port")->capture_default_str();
  listen->add_option("--out", out_dir, "Directory for sessions.jsonl and corpus.jsonl")->required();
  listen->add_option("--banner-file", banner_file, "Bytes sent before the login prompt")->check(CLI::ExistingFile);
  listen->add_option("--responses", responses_file, "JSON object of canned replies by request line")
      ->check(CLI::ExistingFile);
  listen->add_option("--max-bytes", max_bytes)->capture_default_str();
  listen->add_option("--max-seconds", max_seconds)->capture_default_str();
  auto* replay = capture->add_subcommand("replay", "Play a script against a listener");
  std::string target = "127.0.0.1:2323", script_path;
  replay->add_option("--target", target, "host:port")->capture_default_str();
  replay->add_option("--script", script_path, "JSON {username, password, lines[]} with escaped lines")
      ->required()
      ->check(CLI::ExistingFile);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Turn captured sessions into a request-log corpus");
  std::string sessions_path, corpus_out, order_name = "sample_then_dedup";
  std::size_t cap = 20;
  bool no_reduce = false;
  ingest->add_option("--sessions", sessions_path, "sessions.jsonl")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", corpus_out, "corpus.jsonl to write")->required();
  ingest->add_option("--cap", cap, "Logs kept per host")->capture_default_str();
  ingest->add_option("--order", order_name, "sample_then_dedup or dedup_then_sample")->capture_default_str();
  ingest->add_flag("--no-reduce", no_reduce, "Skip per-host sampling and dedup");

  // tokenize
  auto* tok = app.add_subcommand("tokenize", "Print the token sequence of one log or string");
  std::string tok_input, tok_raw;
  std::size_t tok_index = 0;
  auto* tok_input_opt = tok->add_option("--input", tok_input, "corpus.jsonl")->check(CLI::ExistingFile);
  tok->add_option("--index", tok_index, "Log index within --input")->capture_default_str();
  auto* tok_raw_opt = tok->add_option("--raw", tok_raw, "Escaped bytes (\\xHH, \\\\)");
  tok_input_opt->excludes(tok_raw_opt);

  // cluster
  auto* cluster = app.add_subcommand("cluster", "Run the analysis pipeline into a session directory");
  std::string cl_input, cl_out = "llt-session", emit;
  double cl_cut = 0.0;
  std::size_t cl_cap = 20;
  std::string cl_order = "sample_then_dedup";
  cluster->add_option("--input", cl_input, "corpus.jsonl")->required()->check(CLI::ExistingFile);
  cluster->add_option("--out", cl_out, "Session directory")->capture_default_str();
  auto* cut_opt = cluster->add_option("--cut", cl_cut, "Preliminary threshold (suggested when omitted)");
  auto* cap_opt = cluster->add_option("--cap", cl_cap, "Logs kept per host");
  auto* order_opt = cluster->add_option("--order", cl_order, "sample_then_dedup or dedup_then_sample");
  cluster->add_option("--emit", emit, "Print the tree as newick, dot, json or csv")
      ->check(CLI::IsMember({"newick", "dot", "json", "csv"}));

  // templates
  auto* templates = app.add_subcommand("templates", "Print cluster templates");
  std::string session_dir;
  long node = -1;
  bool all_nodes = false;
  std::string tree_path;
  auto* tpl_session_opt = templates->add_option("--session", session_dir, "Session directory");
  auto* tpl_tree_opt = templates->add_option("--tree", tree_path, "tree.json of a session directory")
                           ->check(CLI::ExistingFile);
  tpl_session_opt->excludes(tpl_tree_opt);
  templates->add_option("--node", node, "Only this node");
  templates->add_flag("--all", all_nodes, "Include leaves");

  // families
  auto* families = app.add_subcommand("families", "Inspect and refine families");
  families->add_option("--session", session_dir, "Session directory")->required();
  families->require_subcommand(1);
  std::string actor = "cli";
  families->add_option("--actor", actor, "Recorded as the decision's author")->capture_default_str();
  auto* f_list = families->add_subcommand("list", "Show the current families");
  auto* f_init = families->add_subcommand("init", "Start over from a cut of the tree");
  double f_threshold = 0.0;
  auto* f_threshold_opt = f_init->add_option("--threshold", f_threshold, "Defaults to the session's cut");
  FamilyId fa = 0, fb = 0;
  std::string ftext;
  std::vector<std::string> fchanges;
  auto* f_merge = families->add_subcommand("merge", "Merge two families");
  f_merge->add_option("a", fa)->required();
  f_merge->add_option("b", fb)->required();
  auto* f_split = families->add_subcommand("split", "Split a family at its anchor");
  f_split->add_option("family", fa)->required();
  auto* f_rename = families->add_subcommand("rename", "Name a family");
  f_rename->add_option("family", fa)->required();
  f_rename->add_option("name", ftext)->required();
  auto* f_keep = families->add_subcommand("keep", "Confirm a family as is");
  f_keep->add_option("family", fa)->required();
  auto* f_note = families->add_subcommand("note", "Attach a note to a family");
  f_note->add_option("family", fa)->required();
  f_note->add_option("text", ftext)->required();
  auto* f_annotate = families->add_subcommand("annotate", "Add a lineage edge");
  f_annotate->add_option("from", fa)->required();
  f_annotate->add_option("to", fb)->required();
  f_annotate->add_option("changes", fchanges, "Labels such as '+ persistence' or '± directory detector'");
  auto* f_diff = families->add_subcommand("diff", "Diff the anchor templates of two families");
  f_diff->add_option("a", fa)->required();
  f_diff->add_option("b", fb)->required();
  auto* f_criteria = families->add_subcommand("criteria", "Print the refinement checklist");

  // syngen
  auto* syn = app.add_subcommand("syngen", "Generate a labeled synthetic corpus");
  std::string spec_dir = "specs", syn_out, labels_out;
  std::size_t per_family = 25;
  syn->add_option("--spec-dir", spec_dir, "Directory of family specs")->capture_default_str()->check(CLI::ExistingDirectory);
  syn->add_option("--per-family", per_family)->capture_default_str();
  syn->add_option("--out", syn_out, "corpus.jsonl to write")->required();
  syn->add_option("--labels", labels_out, "Write ground-truth labels JSON here");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve a session directory over HTTP");
  std::string serve_bind;
  serve->add_option("--session", session_dir, "Session directory (or LLT_SESSION_DIR)");
  serve->add_option("--bind", serve_bind, "host:port (or LLT_BIND; default 127.0.0.1:8080)");

  // export
  auto* exp = app.add_subcommand("export", "Export the tree or the family lineage");
  std::string exp_format = "dot", exp_what = "lineage";
  exp->add_option("--session", session_dir, "Session directory")->required();
  exp->add_option("--format", exp_format, "dot, newick, json (csv for the tree)")->capture_default_str();
  exp->add_option("--what", exp_what, "lineage or tree")->capture_default_str()->check(CLI::IsMember({"lineage", "tree"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*listen) {
      CaptureConfig cfg;
      cfg.bind = Endpoint::parse(bind_addr);
      cfg.out_dir = out_dir;
      cfg.max_bytes = max_bytes;
      cfg.max_duration = std::chrono::seconds(max_seconds);
      if (!banner_file.empty()) {
        std::ifstream in(banner_file, std::ios::binary);
        cfg.banner.assign(std::istreambuf_iterator<char>(in), {});
      }
      if (!responses_file.empty()) {
        std::ifstream in(responses_file);
        cfg.responses = json::parse(in).get<std::map<std::string, std::string>>();
      }
      auto signals = block_stop_signals();
      CaptureServer server(cfg, [&](const SessionRecord& r) {
        note(g, "session " + r.peer + ": " + std::to_string(r.client_chunk_count()) + " request lines" +
                    (r.truncated ? " (truncated)" : ""));
      });
      server.start();
      note(g, "listening on " + cfg.bind.host + ":" + std::to_string(server.port()));
      wait_for_stop(signals);
      server.stop();
      note(g, std::to_string(server.sessions_recorded()) + " sessions recorded");
    } else if (*replay) {
      std::cout << replay_client(load_script(script_path), Endpoint::parse(target)) << '\n';
    } else if (*ingest) {
      Corpus corpus;
      std::size_t empty = 0;
      for (const auto& rec : read_session_log(sessions_path)) {
        try {
          corpus.logs.push_back(ingest_session(rec));
        } catch (const EmptySession&) {
          ++empty;
        }
      }
      std::size_t before = corpus.logs.size();
      if (!no_reduce) corpus = reduce(corpus, cap, parse_order(order_name));
      save_corpus(corpus_out, corpus);
      note(g, std::to_string(before) + " request logs (" + std::to_string(empty) + " empty sessions skipped), " +
                  std::to_string(corpus.logs.size()) + " written");
    } else if (*tok) {
      Bytes raw;
      if (*tok_input_opt) {
        Corpus c = load_corpus(tok_input);
        if (tok_index >= c.logs.size()) throw NotFound("no log at index " + std::to_string(tok_index));
        raw = c.logs[tok_index].raw;
      } else {
        raw = unescape_bytes(tok_raw);
      }
      std::cout << format_tokens(tokenize(raw));
    } else if (*cluster) {
      PipelineConfig cfg = base_config(g);
      cfg.input = cl_input;
      cfg.output = cl_out;
      if (*cut_opt) cfg.threshold = cl_cut;
      if (*cap_opt) cfg.host_cap = cl_cap;
      if (*order_opt) cfg.order = parse_order(cl_order);
      if (!emit.empty()) cfg.export_format = emit;
      auto result = run_pipeline(cfg);
      const auto& s = result.session;
      note(g, std::to_string(s.corpus.logs.size()) + " logs, " + std::to_string(s.vocab.total_dims()) + " dims (" +
                  std::to_string(s.vocab.unigrams().size()) + "+" + std::to_string(s.vocab.bigrams().size()) + "+" +
                  std::to_string(s.vocab.trigrams().size()) + "), " + std::to_string(s.partition.groups.size()) +
                  " groups at " + std::to_string(s.partition.threshold) + (s.threshold_suggested ? " (suggested)" : ""));
      note(g, "manifest " + result.manifest_hash);
      if (!emit.empty()) std::cout << emit_tree(s, emit);
    } else if (*templates) {
      if (*tpl_tree_opt) session_dir = std::filesystem::absolute(tree_path).parent_path().string();
      if (session_dir.empty()) throw std::invalid_argument("templates needs --session or --tree");
      auto s = load_session_dir(session_dir);
      for (std::size_t n = 0; n < s.templates.size(); ++n) {
        if (node >= 0 && static_cast<std::size_t>(node) != n) continue;
        if (node < 0 && !all_nodes && s.tree->is_leaf(n)) continue;
        std::cout << n << '\t' << s.tree->size(n) << '\t' << render(s.templates[n]) << '\n';
      }
      if (node >= 0 && !s.tree->contains(static_cast<NodeId>(node))) throw NotFound("no node " + std::to_string(node));
    } else if (*families) {
      auto s = load_session_dir(session_dir);
      FamilyLog log(session_dir, s.tree);
      auto act = [&](ActionKind kind, std::vector<FamilyId> ops) {
        Action a;
        a.kind = kind;
        a.operands = std::move(ops);
        a.actor = actor;
        a.at = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
        return a;
      };
      if (*f_criteria) {
        for (const auto& c : refinement_criteria()) std::cout << "- " << c << '\n';
        return 0;
      }
      if (*f_init) {
        log.init(*f_threshold_opt ? f_threshold : s.partition.threshold);
      } else if (*f_merge) {
        log.apply(act(ActionKind::Merge, {fa, fb}));
      } else if (*f_split) {
        log.apply(act(ActionKind::Split, {fa}));
      } else if (*f_rename) {
        auto a = act(ActionKind::Rename, {fa});
        a.text = ftext;
        log.apply(a);
      } else if (*f_keep) {
        log.apply(act(ActionKind::Keep, {fa}));
      } else if (*f_note) {
        auto a = act(ActionKind::Note, {fa});
        a.text = ftext;
        log.apply(a);
      } else if (*f_annotate) {
        auto a = act(ActionKind::Lineage, {fa, fb});
        LineageEdge e{fa, fb, {}};
        for (const auto& c : fchanges) e.changes.push_back(parse_change_arg(c));
        a.edge = std::move(e);
        log.apply(a);
      } else if (*f_diff) {
        const auto& fs = log.state();
        for (const auto& c : diff_templates(s.templates.at(fs.get(fa).anchor), s.templates.at(fs.get(fb).anchor))) {
          std::cout << c.label() << '\n';
        }
        return 0;
      }
      (void)f_list;
      print_families(log, s);
    } else if (*syn) {
      auto specs = load_family_specs(spec_dir);
      auto lc = generate_corpus(specs, per_family, g.seed);
      save_corpus(syn_out, lc.corpus);
      if (!labels_out.empty()) {
        std::ofstream out(labels_out);
        out << json{{"family_names", lc.family_names}, {"labels", lc.labels}}.dump() << '\n';
      }
      note(g, std::to_string(lc.corpus.logs.size()) + " logs from " + std::to_string(specs.size()) + " families");
    } else if (*serve) {
      ServiceConfig defaults;
      defaults.session_dir = session_dir;
      auto cfg = ServiceConfig::from_env(defaults);
      if (!session_dir.empty()) cfg.session_dir = session_dir;
      if (!serve_bind.empty()) cfg.bind = Endpoint::parse(serve_bind);
      if (cfg.session_dir.empty()) throw Error("no session directory (use --session or LLT_SESSION_DIR)");
      auto signals = block_stop_signals();
      Service svc(cfg.session_dir);
      int port = svc.bind(cfg.bind.host, cfg.bind.port);
      svc.start();
      note(g, "serving " + cfg.session_dir + " on " + cfg.bind.host + ":" + std::to_string(port));
      wait_for_stop(signals);
      svc.stop();
    } else if (*exp) {
      auto s = load_session_dir(session_dir);
      if (exp_what == "tree") {
        std::cout << emit_tree(s, exp_format);
      } else {
        FamilyLog log(session_dir, s.tree);
        FamilySet fs = log.initialized() ? log.state() : FamilySet::init(s.partition, s.tree);
        auto names = display_names(fs, s);
        std::cout << export_lineage(fs, s.templates, lineage_format_from_string(exp_format), &names);
      }
    }
  } catch (const EmptyCorpus& e) {
    std::cerr << "llt: " << e.what() << '\n';
    return 2;
  } catch (const StageError& e) {
    std::cerr << "llt: stage " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "llt: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
