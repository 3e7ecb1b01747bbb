#include "doctest.h"
#include "sqlml/translate/translator.hpp"
#include "support/models.hpp"

using namespace sqlml;
using namespace sqlml::translate;

namespace {

const std::string schema = R"(
CREATE TABLE features (rowID int, featureName string, v double, PRIMARY KEY (rowID, featureName));
CREATE TABLE targets (rowID int, v double, PRIMARY KEY (rowID));
CREATE TABLE weights (featureName string, v double, PRIMARY KEY (featureName));
CREATE TABLE other (rowID int, v double, PRIMARY KEY (rowID));
)";
const std::string config = "features.table = features\nfeatures.name_column = featureName\nweights.table = weights\ntargets.table = targets\n";

ErrorCode translate_error(const std::string& views) {
   try {
      auto m = testing::model_from_text(schema + views, config);
      translate_script(m.script, m.catalog);
   } catch (const Error& e) {
      return e.code();
   }
   return ErrorCode::Internal;
}

std::string assignment(const ir::TensorProgram& p, const std::string& name) {
   auto* a = p.find_assignment(name);
   REQUIRE(a);
   return ir::to_string(*a->expr);
}

}

TEST_CASE("logistic regression translates to the expected program") {
   auto m = testing::load_model("logistic");
   auto p = translate_script(m.script, m.catalog);
   CHECK(p.objective == "objective");
   REQUIRE(p.assignments.size() == 5);
   CHECK(assignment(p, "product") == "(tensordot features weights)");
   CHECK(assignment(p, "sigmoid") == "(div 1 (add 1 (exp (neg product))))");
   CHECK(assignment(p, "log_sigmoid") == "(log sigmoid)");
   CHECK(assignment(p, "log_1_minus_sigmoid") == "(log (sub 1 sigmoid))");
   CHECK(assignment(p, "objective") ==
         "(neg (sum None (add (mul targets log_sigmoid) (mul (sub 1 targets) log_1_minus_sigmoid))))");
   REQUIRE(p.parameters.size() == 1);
   CHECK(p.parameters[0].name == "weights");
   CHECK(p.inputs.size() == 2);
}

TEST_CASE("linear and mean-squared-error models") {
   auto lin = testing::load_model("linear");
   auto p = translate_script(lin.script, lin.catalog);
   CHECK(assignment(p, "errors") == "(sub predictions targets)");
   CHECK(assignment(p, "objective") == "(sum None (square errors))");
   auto mse = testing::load_model("mse");
   auto q = translate_script(mse.script, mse.catalog);
   CHECK(assignment(q, "squared_errors") == "(square (sub predictions targets))");
   CHECK(assignment(q, "mean_squared_error") == "(mean None squared_errors)");
   CHECK(q.objective == "mean_squared_error");
}

TEST_CASE("reduction axis follows the grouping") {
   auto m = testing::load_model("logistic");
   auto product = m.script.find_view("product");
   CHECK(infer_reduce_axis(product->query, m.catalog) == ir::Axis::Columns);
   CHECK(infer_reduce_axis(m.script.find_view("objective")->query, m.catalog) == ir::Axis::All);
   auto byName = sql::parse_script_text(schema + "CREATE VIEW s AS SELECT features.featureName AS name, SUM(features.v) AS v FROM features GROUP BY name;");
   auto cat = catalog::catalog_from_config(catalog::parse_config(config), byName);
   CHECK(infer_reduce_axis(byName.find_view("s")->query, cat) == ir::Axis::Rows);
}

TEST_CASE("views are ordered by dependency") {
   auto script = sql::parse_script_text(schema + R"(
CREATE VIEW b AS SELECT a.rowID AS rowID, a.v * 2 AS v FROM a;
CREATE VIEW a AS SELECT targets.rowID AS rowID, targets.v + 1 AS v FROM targets;
CREATE VIEW c AS SELECT targets.rowID AS rowID, targets.v - 1 AS v FROM targets;
)");
   CHECK(order_views(script) == std::vector<std::string>{"a", "b", "c"});
   auto cyclic = sql::parse_script_text(schema + R"(
CREATE VIEW x AS SELECT y.rowID AS rowID, y.v * 2 AS v FROM y;
CREATE VIEW y AS SELECT x.rowID AS rowID, x.v * 2 AS v FROM x;
)");
   try {
      order_views(cyclic);
      FAIL("expected a cycle");
   } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::CyclicDependency);
   }
}

TEST_CASE("translation errors") {
   CHECK(translate_error("CREATE VIEW o AS SELECT SUM(other.v) AS v FROM other;") == ErrorCode::UnmappedTable);
   CHECK(translate_error("CREATE VIEW o AS SELECT COUNT(targets.v) AS v FROM targets;") == ErrorCode::MissingInput);
   CHECK(translate_error(R"(CREATE VIEW p AS SELECT features.rowID AS rowID, COUNT(features.v) AS v FROM features GROUP BY rowID;)") ==
         ErrorCode::UnsupportedOperator);
   CHECK(translate_error(R"(CREATE VIEW p AS SELECT features.rowID AS rowID, SUM(features.v * weights.v) AS v
      FROM features, weights WHERE features.featureName = weights.featureName GROUP BY rowID;
      CREATE VIEW e AS SELECT p.rowID AS rowID, p.v - targets.v AS v FROM p, targets;)") == ErrorCode::MissingJoinKey);
   CHECK(translate_error(R"(CREATE VIEW p AS SELECT features.rowID AS rowID, SUM(features.v * weights.v) AS v
      FROM features, weights WHERE features.featureName = weights.featureName GROUP BY rowID;
      CREATE VIEW e AS SELECT p.rowID AS rowID, p.v - targets.v AS v FROM p, targets WHERE p.rowID = targets.rowID;)") ==
         ErrorCode::ShapeMismatch);
   CHECK(translate_error(R"(CREATE VIEW p AS SELECT features.rowID AS rowID, SUM(features.v * weights.v) AS v
      FROM features, weights WHERE features.featureName = weights.featureName GROUP BY rowID;
      CREATE VIEW o AS SELECT SUM(p.v * SUM(p.v)) AS v FROM p;)") == ErrorCode::ParseError);
   CHECK(translate_error(R"(CREATE VIEW p AS SELECT features.rowID AS rowID, SUM(features.v * weights.v) AS v
      FROM features, weights WHERE features.featureName = weights.featureName GROUP BY rowID;
      CREATE VIEW o AS SELECT SUM(p.rowID * p.v) AS v FROM p;)") == ErrorCode::TypeError);
   CHECK(translate_error(R"(CREATE VIEW o AS SELECT features.featureName AS name, SUM(features.v * weights.v) AS v
      FROM features, weights WHERE features.featureName = weights.featureName GROUP BY name;)") == ErrorCode::ShapeMismatch);
   CHECK(translate_error(R"(CREATE VIEW p AS SELECT features.rowID AS rowID, features.v + SUM(features.v) AS v
      FROM features GROUP BY rowID;)") == ErrorCode::UnsupportedFeature);
}

TEST_CASE("translation errors carry the view position") {
   try {
      auto m = testing::model_from_text(schema + "\n\nCREATE VIEW o AS SELECT SUM(other.v) AS v FROM other;", config);
      translate_script(m.script, m.catalog);
      FAIL("expected an error");
   } catch (const SourceError& e) {
      CHECK(e.pos().line == 8);
   }
}

TEST_CASE("several feature tables become slices of one matrix") {
   auto m = testing::load_model("normalized");
   auto p = translate_script(m.script, m.catalog);
   REQUIRE(p.inputs.size() == 2);
   CHECK(p.inputs[0].name == "features");
   CHECK(p.inputs[0].shape == ir::Shape{"n", "F"});
   CHECK(assignment(p, "item_product") == "(tensordot (slice itemFeatures features) itemWeights)");
   CHECK(assignment(p, "predictions") == "(add item_product store_product)");
   auto bound = bind_ranges(p, {{"itemFeatures", {0, 3}}, {"storeFeatures", {3, 2}}});
   CHECK(assignment(bound, "store_product") == "(tensordot (slice 3 2 features) storeWeights)");
   CHECK(bound.inputs[0].shape == ir::Shape{"n", "5"});
   CHECK(bound.parameters[1].shape == ir::Shape{"2"});
   CHECK(ir::validate(bound).empty());
}

TEST_CASE("a shared weight table is sliced per feature table") {
   auto m = testing::model_from_text(R"(
CREATE TABLE a (rowID int, name string, v double, PRIMARY KEY (rowID, name));
CREATE TABLE b (rowID int, name string, v double, PRIMARY KEY (rowID, name));
CREATE TABLE t (rowID int, v double, PRIMARY KEY (rowID));
CREATE TABLE w (name string, v double, PRIMARY KEY (name));
CREATE VIEW pa AS SELECT a.rowID AS rowID, SUM(a.v * w.v) AS v FROM a, w WHERE a.name = w.name GROUP BY rowID;
CREATE VIEW pb AS SELECT b.rowID AS rowID, SUM(b.v * w.v) AS v FROM b, w WHERE b.name = w.name GROUP BY rowID;
CREATE VIEW o AS SELECT SUM(POW(pa.v + pb.v - t.v, 2)) AS v FROM pa, pb, t WHERE pa.rowID = pb.rowID AND pb.rowID = t.rowID;
)",
                                     "features.table = a, b\nfeatures.name_column = name\nweights.table = w\ntargets.table = t\n");
   auto p = translate_script(m.script, m.catalog);
   CHECK(assignment(p, "pb") == "(tensordot (slice b features) (slice b w))");
   CHECK(ir::validate(p).empty());
}

TEST_CASE("operator table covers every SQL construct") {
   std::set<std::string> ir;
   for (auto& row : operator_table()) ir.insert(row.ir);
   for (auto op : {ir::ElemOp::Add, ir::ElemOp::Sub, ir::ElemOp::Mul, ir::ElemOp::Div}) CHECK(ir.count(std::string(ir::elem_op_name(op))));
   for (auto op : {ir::UnaryOp::Neg, ir::UnaryOp::Exp, ir::UnaryOp::Log, ir::UnaryOp::Square}) CHECK(ir.count(std::string(ir::unary_op_name(op))));
   for (auto op : {ir::ReduceOp::Sum, ir::ReduceOp::Mean, ir::ReduceOp::Size}) CHECK(ir.count(std::string(ir::reduce_op_name(op))));
   CHECK(ir.count("tensordot"));
   CHECK(operator_table().size() == 12);
}

TEST_CASE("a finer-grained relation may join coarser ones on part of its key") {
   auto m = testing::load_model("sales");
   CHECK_NOTHROW(translate::translate_script(m.script, m.catalog));
   auto sql = testing::read_fixture("sales/model.sql");
   auto pos = sql.find(" AND predictions.dateID = sales.dateID");
   REQUIRE(pos != std::string::npos);
   sql.erase(pos, std::string(" AND predictions.dateID = sales.dateID").size());
   auto bad = testing::model_from_text(sql, testing::read_fixture("sales/model.conf"));
   try {
      translate::translate_script(bad.script, bad.catalog);
      FAIL("expected MissingJoinKey");
   } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingJoinKey);
   }
}
