#include "doctest.h"
#include "sqlml/sql/parser.hpp"
#include "support/fixtures.hpp"
#include <random>

using namespace sqlml;
using namespace sqlml::sql;
using E = NumericExpr;

namespace {

ErrorCode parse_error_code(std::string_view text) {
   try {
      parse_script_text(text);
   } catch (const Error& e) {
      return e.code();
   }
   return ErrorCode::Internal;
}

}

TEST_CASE("predictions view parses with group by and the product sum") {
   auto script = parse_script_text(R"(
      CREATE VIEW predictions AS
        SELECT features.rowID AS rowID,
        SUM(features.v * weights.v) AS v
        FROM features, weights
        WHERE features.featureName = weights.featureName
        GROUP BY rowID;)");
   REQUIRE(script.statements.size() == 1);
   auto& view = std::get<CreateView>(script.statements[0]);
   CHECK(view.name == "predictions");
   REQUIRE(view.query.groupBy.has_value());
   CHECK(*view.query.groupBy == std::vector<ColumnRef>{{"features", "rowID"}});
   CHECK(extract_numeric_expr(view.query) ==
         E::call(Function::Sum, {E::binary(BinaryOp::Mul, E::column_ref("features", "v"), E::column_ref("weights", "v"))}));
   CHECK(view.query.joinPredicates == std::vector<JoinPredicate>{{{"features", "featureName"}, {"weights", "featureName"}}});
}

TEST_CASE("two numeric projections are rejected") {
   try {
      parse_script_text("CREATE VIEW v AS SELECT 1 + t.a AS a, EXP(t.b) AS b FROM t;");
      FAIL("expected a parse error");
   } catch (const SourceError& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      CHECK(std::string(e.what()).find("exactly one numeric expression") != std::string::npos);
   }
}

TEST_CASE("the logistic regression script parses into five views") {
   auto script = parse_script_text(testing::read_fixture("logistic/model.sql"));
   auto views = script.views();
   REQUIRE(views.size() == 5);
   CHECK(views[0]->name == "product");
   CHECK(views[4]->name == "objective");
   CHECK(script.tables().size() == 4);

   SUBCASE("sigmoid numeric expression") {
      auto expected = E::binary(BinaryOp::Div, E::constant(1),
                                E::binary(BinaryOp::Add, E::constant(1), E::call(Function::Exp, {E::neg(E::column_ref("product", "v"))})));
      CHECK(extract_numeric_expr(views[1]->query) == expected);
   }
   SUBCASE("objective is a negated sum") {
      auto& e = extract_numeric_expr(views[4]->query);
      REQUIRE(e.kind == E::Kind::Neg);
      REQUIRE(e.args[0].kind == E::Kind::Func);
      CHECK(e.args[0].func == Function::Sum);
      auto one_minus = E::binary(BinaryOp::Sub, E::constant(1), E::column_ref("targets", "v"));
      auto body = E::binary(BinaryOp::Add, E::binary(BinaryOp::Mul, E::column_ref("targets", "v"), E::column_ref("log_sigmoid", "v")),
                            E::binary(BinaryOp::Mul, one_minus, E::column_ref("log_1_minus_sigmoid", "v")));
      CHECK(e.args[0].args[0] == body);
      CHECK(views[4]->query.joinPredicates.size() == 2);
      CHECK_FALSE(views[4]->query.groupBy.has_value());
   }
   SUBCASE("product view keeps its numeric projection index") {
      CHECK(views[0]->query.numericIndex == 0);
      CHECK(views[0]->query.projections[1].alias == "rowID");
   }
}

TEST_CASE("constant projection is the numeric expression") {
   auto tokens = tokenize("SELECT t.a AS a, 5.0 AS v FROM t");
   auto q = parse_select(tokens);
   CHECK(extract_numeric_expr(q) == E::constant(5.0));
   CHECK(q.numericIndex == 1);
}

TEST_CASE("unary minus and (-1)* both normalize to Neg") {
   auto a = parse_select(tokenize("SELECT -t.v AS v FROM t"));
   auto b = parse_select(tokenize("SELECT (-1)*t.v AS v FROM t"));
   auto c = parse_select(tokenize("SELECT t.v*(-1) AS v FROM t"));
   CHECK(extract_numeric_expr(a) == E::neg(E::column_ref("t", "v")));
   CHECK(extract_numeric_expr(b) == extract_numeric_expr(a));
   CHECK(extract_numeric_expr(c) == extract_numeric_expr(a));
   auto d = parse_select(tokenize("SELECT 1 - t.v AS v FROM t"));
   CHECK(extract_numeric_expr(d).kind == E::Kind::Binary);
}

TEST_CASE("all-bare-column views resolve the numeric column from the schema") {
   auto script = parse_script_text(R"(
      CREATE TABLE t (rowID int, v double, PRIMARY KEY (rowID));
      CREATE VIEW a AS SELECT t.rowID AS rowID, t.v AS v FROM t;
      CREATE VIEW b AS SELECT a.v AS value, a.rowID AS id FROM a;)");
   CHECK(script.find_view("a")->query.numericIndex == 1);
   CHECK(script.find_view("b")->query.numericIndex == 0);
   CHECK(parse_error_code("CREATE VIEW a AS SELECT t.x AS x, t.y AS y FROM t;") == ErrorCode::ParseError);
}

TEST_CASE("unqualified columns resolve against the schema") {
   auto script = parse_script_text(R"(
      CREATE TABLE f (rowID int, featureName string, v double, PRIMARY KEY (rowID, featureName));
      CREATE TABLE w (featureName string, v double, PRIMARY KEY (featureName));
      CREATE VIEW p AS SELECT SUM(f.v * w.v) AS v FROM f, w WHERE f.featureName = w.featureName GROUP BY rowID;)");
   CHECK(*script.find_view("p")->query.groupBy == std::vector<ColumnRef>{{"f", "rowID"}});
   CHECK(parse_error_code(R"(
      CREATE TABLE f (rowID int, featureName string, v double);
      CREATE TABLE w (featureName string, v double);
      CREATE VIEW p AS SELECT SUM(f.v * w.v) AS v FROM f, w WHERE f.featureName = w.featureName GROUP BY featureName;)") ==
         ErrorCode::ParseError);
}

TEST_CASE("unsupported SQL is rejected with UnsupportedFeature") {
   CHECK(parse_error_code("CREATE VIEW v AS SELECT SUM(t.v) AS v FROM (SELECT 1 AS v FROM x) ;") == ErrorCode::UnsupportedFeature);
   CHECK(parse_error_code("CREATE VIEW v AS SELECT (SELECT 1 AS v FROM x) AS v FROM t;") == ErrorCode::UnsupportedFeature);
   CHECK(parse_error_code("CREATE VIEW v AS SELECT t.a + 1 AS v FROM t ORDER BY t.a;") == ErrorCode::UnsupportedFeature);
   CHECK(parse_error_code("CREATE VIEW v AS SELECT SUM(t.a) AS v FROM t GROUP BY t.b HAVING t.b;") == ErrorCode::UnsupportedFeature);
   CHECK(parse_error_code("CREATE VIEW v AS SELECT t.a + 1 AS v FROM t, u WHERE t.a < u.a;") == ErrorCode::UnsupportedFeature);
   CHECK(parse_error_code("CREATE VIEW v AS SELECT t.a + 1 AS v FROM t WHERE t.a = 3;") == ErrorCode::UnsupportedFeature);
   CHECK(parse_error_code("CREATE VIEW v AS SELECT t.a + 1 AS v FROM t, u WHERE t.a = u.a OR t.b = u.b;") == ErrorCode::UnsupportedFeature);
   CHECK(parse_error_code("CREATE VIEW v AS SELECT POW(t.a, 3) AS v FROM t;") == ErrorCode::UnsupportedFeature);
   CHECK(parse_error_code("CREATE VIEW v AS SELECT SQRT(t.a) AS v FROM t;") == ErrorCode::UnsupportedFeature);
   CHECK(parse_error_code("INSERT INTO t VALUES (1);") == ErrorCode::UnsupportedFeature);
}

TEST_CASE("structural errors are parse errors") {
   CHECK(parse_error_code("CREATE VIEW v AS SELECT SUM(SUM(t.a)) AS v FROM t;") == ErrorCode::ParseError);
   CHECK(parse_error_code("CREATE VIEW v AS SELECT EXP(t.a, t.b) AS v FROM t;") == ErrorCode::ParseError);
   CHECK(parse_error_code("CREATE VIEW v AS SELECT t.a + 1 AS v FROM t") == ErrorCode::ParseError);
   CHECK(parse_error_code("CREATE VIEW v AS SELECT t.a + 1 AS v FROM t; CREATE VIEW v AS SELECT t.a + 2 AS v FROM t;") == ErrorCode::ParseError);
   CHECK(parse_error_code("CREATE TABLE t (a int, a double);") == ErrorCode::ParseError);
   CHECK(parse_error_code("CREATE TABLE t (a blob);") == ErrorCode::ParseError);
   CHECK(parse_error_code("CREATE VIEW v AS SELECT u.a + 1 AS v FROM t;") == ErrorCode::ParseError);
   CHECK(parse_error_code("SELECT 1 AS v FROM t;") == ErrorCode::ParseError);
}

TEST_CASE("parse errors list expected tokens") {
   try {
      parse_script_text("CREATE VIEW v SELECT");
      FAIL("expected parse error");
   } catch (const SourceError& e) {
      CHECK(e.detail() == "expected AS, got 'SELECT'");
      CHECK(e.pos().column == 15);
   }
}

TEST_CASE("create table with keys and types") {
   auto script = parse_script_text("CREATE TABLE sales (itemID varchar(20), storeID text, v DOUBLE PRECISION, n INTEGER PRIMARY KEY);");
   auto* t = script.find_table("sales");
   REQUIRE(t);
   CHECK(t->columns[0].type == ColumnType::String);
   CHECK(t->columns[1].type == ColumnType::String);
   CHECK(t->columns[2].type == ColumnType::Double);
   CHECK(t->columns[3].type == ColumnType::Int);
   CHECK(t->primaryKey == std::vector<std::string>{"n"});
}

namespace {

E random_expr(std::mt19937& rng, int depth, bool allowAggregate) {
   std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 6);
   switch (pick(rng)) {
      case 0: return E::constant(std::uniform_int_distribution<int>(-20, 20)(rng) / 4.0);
      case 1: return E::column_ref(rng() % 2 ? "a" : "b", rng() % 2 ? "v" : "w");
      case 2: {
         auto inner = random_expr(rng, depth - 1, allowAggregate);
         if (inner.kind == E::Kind::Const) return inner;  // -literal folds into the constant
         return E::neg(std::move(inner));
      }
      case 3:
      case 4: {
         auto op = static_cast<BinaryOp>(rng() % 4);
         auto l = random_expr(rng, depth - 1, allowAggregate);
         auto r = random_expr(rng, depth - 1, allowAggregate);
         if (op == BinaryOp::Mul && ((l.kind == E::Kind::Const && l.value == -1) || (r.kind == E::Kind::Const && r.value == -1))) op = BinaryOp::Add;
         return E::binary(op, std::move(l), std::move(r));
      }
      case 5: {
         auto f = static_cast<Function>(3 + rng() % 3);
         if (f == Function::Pow) return E::call(f, {random_expr(rng, depth - 1, allowAggregate), E::constant(2)});
         return E::call(f, {random_expr(rng, depth - 1, allowAggregate)});
      }
      default: {
         if (!allowAggregate) return E::column_ref("a", "v");
         auto f = static_cast<Function>(rng() % 3);
         return E::call(f, {random_expr(rng, depth - 1, false)});
      }
   }
}

}

TEST_CASE("pretty-printing then re-parsing yields the same AST") {
   std::mt19937 rng(7);
   for (int round = 0; round < 300; ++round) {
      SqlScript script;
      script.statements.push_back(CreateTable{"a", {{"rowID", ColumnType::Int}, {"v", ColumnType::Double}, {"w", ColumnType::Double}}, {"rowID"}, {}});
      script.statements.push_back(CreateTable{"b", {{"rowID", ColumnType::Int}, {"v", ColumnType::Double}, {"w", ColumnType::Double}}, {}, {}});
      CreateView view;
      view.name = "view" + std::to_string(round);
      auto expr = random_expr(rng, 4, true);
      if (expr.is_column()) expr = E::call(Function::Exp, {expr});
      view.query.projections.push_back({E::column_ref("a", "rowID"), "rowID"});
      view.query.projections.push_back({expr, "v"});
      view.query.numericIndex = 1;
      view.query.fromTables = {"a", "b"};
      view.query.joinPredicates.push_back({{"a", "rowID"}, {"b", "rowID"}});
      if (round % 2) view.query.groupBy = std::vector<ColumnRef>{{"a", "rowID"}};
      script.statements.push_back(view);

      auto text = to_sql(script);
      SqlScript reparsed;
      REQUIRE_NOTHROW(reparsed = parse_script_text(text));
      CHECK_MESSAGE(reparsed == script, text);
   }

   auto logistic = parse_script_text(testing::read_fixture("logistic/model.sql"));
   CHECK(parse_script_text(to_sql(logistic)) == logistic);
}

TEST_CASE("random token soup always terminates with an AST or a positioned error") {
   const std::vector<std::string> vocabulary{
      "CREATE", "VIEW", "TABLE", "AS", "SELECT", "FROM", "WHERE", "AND", "GROUP", "BY", "PRIMARY", "KEY", "(", ")", ",", ";", ".",
      "*", "/", "+", "-", "=", "<", "t", "u", "v", "rowID", "1", "2", "0.5", "SUM", "EXP", "LN", "POW", "AVG", "COUNT", "int",
      "double", "'s'", "ORDER", "OR", "CASE",
   };
   std::mt19937 rng(11);
   int parsed = 0;
   for (int round = 0; round < 5000; ++round) {
      std::string text;
      int len = 1 + static_cast<int>(rng() % 40);
      if (round % 3 == 0) text = "CREATE VIEW x AS SELECT ";
      for (int i = 0; i < len; ++i) text += vocabulary[rng() % vocabulary.size()] + " ";
      try {
         parse_script_text(text);
         ++parsed;
      } catch (const SourceError& e) {
         CHECK(e.pos().offset <= text.size());
         CHECK(e.pos().line == 1);
         CHECK(e.pos().column <= text.size() + 1);
      }
   }
   CHECK(parsed >= 0);
}
