#include "sqlml/cli/cli.hpp"

#include "sqlml/codegen/emitter.hpp"
#include "sqlml/data/pivot.hpp"
#include "sqlml/sql/parser.hpp"
#include "sqlml/translate/translator.hpp"
#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace sqlml::cli {

namespace fs = std::filesystem;

namespace {

struct Parser {
   CLI::App app{"Translate SQL model definitions into tensor programs and train them", "sqlml"};
   Command cmd;
   std::map<CLI::App*, CommandKind> kinds;

   Parser() {
      app.require_subcommand(1);
      auto add = [&](const char* name, const char* help, CommandKind kind, bool data, bool outDir) {
         auto* sub = app.add_subcommand(name, help);
         sub->add_option("--sql", cmd.sqlPath, "SQL script with tables and views")->required();
         sub->add_option("--config", cmd.configPath, "Role and hyperparameter config")->required();
         auto* d = sub->add_option("--data-dir", cmd.dataDir, "Directory with one <table>.csv per table");
         if (data) d->required();
         auto* o = sub->add_option("--out-dir", cmd.outDir, "Directory receiving the artifacts");
         if (outDir) o->required();
         sub->add_option("--iterations", cmd.iterations, "Override gd.iterations")->check(CLI::PositiveNumber);
         sub->add_option("--learning-rate", cmd.learningRate, "Override gd.learning_rate")->check(CLI::PositiveNumber);
         sub->add_option("--print-every", cmd.printEvery, "Objective print interval")->check(CLI::PositiveNumber);
         kinds[sub] = kind;
         return sub;
      };
      add("translate", "Emit the training script and SQL bundle", CommandKind::Translate, true, true);
      add("export-queries", "Emit the feature and target export queries", CommandKind::ExportQueries, true, true);
      add("train", "Train in process and write weights, import SQL and loss trace", CommandKind::Train, true, true);
      add("import-weights", "Regenerate the import SQL from a weights CSV", CommandKind::ImportWeights, false, true)
          ->add_option("--weights", cmd.weightsPath, "Weights CSV (default <out-dir>/weights.csv)");
      add("check-grad", "Compare analytic and numeric gradients", CommandKind::CheckGrad, true, false)
          ->add_option("--points", cmd.points, "Number of seeded parameter points")
          ->check(CLI::PositiveNumber);
   }

   void parse(const std::vector<std::string>& args) {
      std::vector<std::string> reversed(args.rbegin(), args.rend());
      app.parse(reversed);
      for (auto& [sub, kind] : kinds)
         if (sub->parsed()) cmd.kind = kind;
      if (cmd.kind == CommandKind::ImportWeights && cmd.weightsPath.empty()) cmd.weightsPath = cmd.outDir / "weights.csv";
   }
};

std::string read_file(const fs::path& path) {
   std::ifstream in(path, std::ios::binary);
   if (!in) throw Error(ErrorCode::MissingInput, "cannot read '" + path.string() + "'");
   std::ostringstream s;
   s << in.rdbuf();
   return s.str();
}

std::string exact(double v) {
   char buf[64];
   std::snprintf(buf, sizeof buf, "%.17g", v);
   return buf;
}

struct Loaded {
   sql::SqlScript script;
   catalog::Catalog catalog;
   ir::TensorProgram program;
};

Loaded load(const Command& cmd) {
   Loaded l;
   auto text = read_file(cmd.sqlPath);
   try {
      l.script = sql::parse_script_text(text);
   } catch (const SourceError& e) {
      throw Error(e.code(), cmd.sqlPath.filename().string() + ":" + e.what());
   }
   l.catalog = catalog::load_config(cmd.configPath, l.script);
   auto& hp = l.catalog.mutable_hyperparams();
   if (cmd.iterations) hp.iterations = *cmd.iterations;
   if (cmd.learningRate) hp.learningRate = *cmd.learningRate;
   l.program = translate::translate_script(l.script, l.catalog);
   return l;
}

std::string weights_csv(const catalog::Catalog& cat, const data::FeatureMapping& mapping, const runtime::Bindings& params) {
   std::string out = "table,name,value\n";
   for (auto& w : cat.weights_tables()) {
      auto it = params.find(w);
      if (it == params.end()) continue;
      for (auto& row : data::weights_relation(cat, mapping, it->second, w).rows)
         out += data::csv_field(w) + "," + data::csv_field(std::get<std::string>(row[0])) + "," + exact(std::get<double>(row[1])) + "\n";
   }
   return out;
}

std::string import_from_csv(const catalog::Catalog& cat, const fs::path& path) {
   auto records = data::parse_csv_records(read_file(path));
   if (records.empty() || records.front() != std::vector<std::string>{"table", "name", "value"})
      throw Error(ErrorCode::SchemaMismatch, path.filename().string() + ": expected header table,name,value");
   std::string out;
   for (std::size_t i = 1; i < records.size(); ++i) {
      auto& r = records[i];
      auto where = path.filename().string() + " line " + std::to_string(i + 1);
      if (r.size() != 3) throw Error(ErrorCode::LengthMismatch, where + ": expected 3 fields");
      if (!cat.has_table(r[0]) || !cat.is_weights(r[0])) throw Error(ErrorCode::UnknownTable, where + ": '" + r[0] + "' is not a weights table");
      double v = 0;
      auto [end, ec] = std::from_chars(r[2].data(), r[2].data() + r[2].size(), v);
      if (ec != std::errc{} || end != r[2].data() + r[2].size()) throw Error(ErrorCode::NonNumericValue, where + ": '" + r[2] + "' is not a number");
      auto& entry = cat.table(r[0]);
      out += "INSERT INTO " + r[0] + "(" + entry.nameColumn + ", " + entry.valueColumn + ") VALUES (" + data::quote_sql_string(r[1]) + ", " +
             exact(v) + ");\n";
   }
   return out;
}

}

Command parse_command(const std::vector<std::string>& args) {
   Parser p;
   try {
      p.parse(args);
   } catch (const CLI::ParseError& e) {
      throw Error(ErrorCode::Usage, e.what());
   }
   return p.cmd;
}

Artifacts execute(const Command& cmd, std::ostream& out, std::ostream& log) {
   auto l = load(cmd);
   auto& cat = l.catalog;
   Artifacts a;

   if (cmd.kind == CommandKind::ImportWeights) {
      a["import_weights.sql"] = import_from_csv(cat, cmd.weightsPath);
      return a;
   }

   auto db = data::load_tables(cat, cmd.dataDir);
   switch (cmd.kind) {
      case CommandKind::Translate: {
         auto mapping = data::build_feature_mapping(cat, db);
         cat.check_feature_counts(mapping.counts());
         codegen::EmitOptions options;
         if (cmd.printEvery) options.printEvery = *cmd.printEvery;
         auto bundle = codegen::emit_export_queries(cat, mapping);
         auto bound = translate::bind_ranges(l.program, mapping.ranges());
         auto start = runtime::initial_parameters(bound, cat.hyperparams().seed, cat.hyperparams().initRange);
         a["model_train.py"] = codegen::emit_program(l.program, cat, &mapping, options);
         a["export_features.sql"] = bundle.featuresSql;
         a["export_targets.sql"] = bundle.targetsSql;
         a["import_weights.sql"] = data::gen_weight_import(cat, mapping, start);
         break;
      }
      case CommandKind::ExportQueries: {
         auto bundle = codegen::emit_export_queries(cat, data::build_feature_mapping(cat, db));
         a["export_features.sql"] = bundle.featuresSql;
         a["export_targets.sql"] = bundle.targetsSql;
         break;
      }
      case CommandKind::Train: {
         auto data = data::prepare_training(l.program, cat, db);
         auto& hp = cat.hyperparams();
         runtime::TrainOptions options;
         options.iterations = hp.iterations;
         options.learningRate = hp.learningRate;
         options.batchSize = hp.batchSize;
         if (cmd.printEvery) {
            auto every = *cmd.printEvery;
            options.onIteration = [&log, every](std::int64_t i, double loss) {
               if (i % every == 0) log << "iteration " << i << " objective " << runtime::format_double(loss) << "\n";
            };
         }
         auto start = runtime::initial_parameters(data.program, hp.seed, hp.initRange);
         auto result = runtime::gd_train(data.program, data.inputs, std::move(start), options);
         a["weights.csv"] = weights_csv(cat, data.pivot.mapping, result.parameters);
         a["import_weights.sql"] = data::gen_weight_import(cat, data.pivot.mapping, result.parameters);
         a["loss_trace.csv"] = runtime::loss_trace_csv(result.lossTrace);
         if (!result.lossTrace.empty()) out << "final objective " << runtime::format_double(result.lossTrace.back()) << "\n";
         break;
      }
      case CommandKind::CheckGrad: {
         auto data = data::prepare_training(l.program, cat, db);
         runtime::GradCheckResult worst;
         for (std::int64_t k = 0; k < cmd.points; ++k) {
            auto env = data.inputs;
            for (auto& [name, v] : runtime::initial_parameters(data.program, cat.hyperparams().seed + k, 0.5)) env[name] = v;
            auto r = runtime::finite_diff_check(data.program, env);
            if (k == 0 || r.maxError > worst.maxError) worst = r;
         }
         out << "max_error " << runtime::format_double(worst.maxError) << " parameter " << worst.worstParameter << " index " << worst.worstIndex
             << "\n";
         if (!(worst.maxError <= 1e-4))
            throw Error(ErrorCode::GradientCheckFailed, "gradient error " + runtime::format_double(worst.maxError) + " exceeds 1e-4 at " +
                                                            worst.worstParameter + "[" + std::to_string(worst.worstIndex) + "]");
         break;
      }
      case CommandKind::ImportWeights: break;
   }
   return a;
}

void write_artifacts(const fs::path& dir, const Artifacts& artifacts) {
   if (artifacts.empty()) return;
   std::vector<fs::path> written;
   try {
      fs::create_directories(dir);
      for (auto& [name, content] : artifacts) {
         auto path = dir / name;
         std::ofstream f(path, std::ios::binary | std::ios::trunc);
         if (!f) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
         written.push_back(path);
         f << content;
         f.close();
         if (!f) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
      }
   } catch (const fs::filesystem_error& e) {
      std::error_code ignored;
      for (auto& p : written) fs::remove(p, ignored);
      throw Error(ErrorCode::IoError, e.what());
   } catch (...) {
      std::error_code ignored;
      for (auto& p : written) fs::remove(p, ignored);
      throw;
   }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
   Parser p;
   try {
      p.parse(args);
   } catch (const CLI::CallForHelp&) {
      out << p.app.help();
      return 0;
   } catch (const CLI::ParseError& e) {
      err << "error " << error_code_name(ErrorCode::Usage) << ": " << e.what() << "\n";
      return exit_status(ErrorCode::Usage);
   }
   try {
      auto artifacts = execute(p.cmd, out, err);
      write_artifacts(p.cmd.outDir, artifacts);
      return 0;
   } catch (const Error& e) {
      err << "error " << error_code_name(e.code()) << ": " << e.what() << "\n";
      return exit_status(e.code());
   } catch (const std::exception& e) {
      err << "error " << error_code_name(ErrorCode::Internal) << ": " << e.what() << "\n";
      return exit_status(ErrorCode::Internal);
   }
}

}
