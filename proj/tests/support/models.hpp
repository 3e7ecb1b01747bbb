#pragma once

#include "sqlml/catalog/catalog.hpp"
#include "sqlml/runtime/interpreter.hpp"
#include "sqlml/sql/parser.hpp"
#include "sqlml/translate/translator.hpp"
#include "support/oracles.hpp"
#include "support/fixtures.hpp"

namespace sqlml::testing {

struct Model {
   sql::SqlScript script;
   catalog::Catalog catalog;
};

/// Script and catalog from fixtures/<dir>/model.sql and model.conf
inline Model load_model(const std::string& dir) {
   Model m;
   m.script = sql::parse_script_text(read_fixture(dir + "/model.sql"));
   m.catalog = catalog::load_config(fixture_path(dir + "/model.conf"), m.script);
   return m;
}

inline Model model_from_text(const std::string& sqlText, const std::string& configText) {
   Model m;
   m.script = sql::parse_script_text(sqlText);
   m.catalog = catalog::catalog_from_config(catalog::parse_config(configText), m.script);
   return m;
}

/// Translated program for a single-feature-table model with F features
inline ir::TensorProgram bound_program(const Model& m, std::int64_t F) {
   auto p = translate::translate_script(m.script, m.catalog);
   return translate::bind_ranges(p, {{m.catalog.features_tables().front(), {0, F}}});
}

/// Inputs and weights of a single-table model bound to a problem
inline runtime::Bindings bind_problem(const ir::TensorProgram& prog, const Problem& p, const std::vector<double>& theta) {
   runtime::Bindings env;
   env[prog.inputs[0].name] = runtime::TensorValue::matrix(p.n, p.F, p.X);
   for (auto& d : prog.inputs)
      if (d.shape.size() == 1) env[d.name] = runtime::TensorValue::vector(p.y);
   env[prog.parameters[0].name] = runtime::TensorValue::vector(theta);
   return env;
}

}
