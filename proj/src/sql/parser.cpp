#include "sqlml/sql/parser.hpp"
#include <algorithm>
#include <cctype>
#include <initializer_list>
#include <map>
#include <set>

namespace sqlml::sql {

namespace {

bool iequals(std::string_view a, std::string_view b) {
   return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
             return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
          });
}

std::optional<Function> lookup_function(std::string_view name) {
   for (Function f : {Function::Sum, Function::Count, Function::Avg, Function::Exp, Function::Ln, Function::Pow})
      if (iequals(function_name(f), name)) return f;
   return std::nullopt;
}

std::optional<ColumnType> lookup_type(std::string_view name) {
   for (auto n : {"INT", "INTEGER", "BIGINT", "SMALLINT"})
      if (iequals(name, n)) return ColumnType::Int;
   for (auto n : {"DOUBLE", "REAL", "FLOAT", "NUMERIC", "DECIMAL"})
      if (iequals(name, n)) return ColumnType::Double;
   for (auto n : {"STRING", "TEXT", "VARCHAR", "CHAR"})
      if (iequals(name, n)) return ColumnType::String;
   return std::nullopt;
}

constexpr int maxNesting = 200;

/// Recursive-descent parser over a token span that always ends with EndOfInput
class Parser {
   public:
   explicit Parser(std::span<const Token> tokens) : tokens(tokens) {
      if (tokens.empty() || !tokens.back().is(TokenKind::EndOfInput))
         throw Error(ErrorCode::ParseError, "token stream must end with end of input");
   }

   SqlScript script() {
      SqlScript result;
      while (!peek().is(TokenKind::EndOfInput)) {
         result.statements.push_back(statement());
      }
      return result;
   }

   SelectQuery standalone_select() {
      SelectQuery q = select();
      accept(TokenKind::Semicolon);
      expect_one({TokenKind::EndOfInput});
      return q;
   }

   private:
   std::span<const Token> tokens;
   std::size_t cursor = 0;
   int depth = 0;

   const Token& peek(std::size_t ahead = 0) const {
      return tokens[std::min(cursor + ahead, tokens.size() - 1)];
   }
   const Token& take() {
      const Token& t = tokens[cursor];
      if (cursor + 1 < tokens.size()) ++cursor;
      return t;
   }
   bool accept(TokenKind kind) {
      if (!peek().is(kind)) return false;
      take();
      return true;
   }

   [[noreturn]] void fail_expected(std::initializer_list<TokenKind> expected) const {
      std::string message = "expected ";
      std::size_t i = 0;
      for (TokenKind k : expected) {
         if (i++) message += (i == expected.size()) ? " or " : ", ";
         message += token_kind_name(k);
      }
      const Token& got = peek();
      message += ", got ";
      message += got.is(TokenKind::EndOfInput) ? "end of input" : "'" + got.text + "'";
      throw SourceError(ErrorCode::ParseError, got.pos, message);
   }

   const Token& expect_one(std::initializer_list<TokenKind> expected) {
      for (TokenKind k : expected)
         if (peek().is(k)) return take();
      fail_expected(expected);
   }
   const Token& expect(TokenKind kind) { return expect_one({kind}); }

   [[noreturn]] void unsupported(const Token& at, const std::string& what) const {
      throw SourceError(ErrorCode::UnsupportedFeature, at.pos, what + " is not supported");
   }

   void reject_unsupported_clause() {
      const Token& t = peek();
      switch (t.kind) {
         case TokenKind::Order: unsupported(t, "ORDER BY");
         case TokenKind::Having: unsupported(t, "HAVING");
         case TokenKind::Limit: unsupported(t, "LIMIT");
         case TokenKind::Union: unsupported(t, "UNION");
         case TokenKind::Join: unsupported(t, "explicit JOIN (use a comma join with WHERE equalities)");
         case TokenKind::On: unsupported(t, "explicit JOIN ... ON");
         default: break;
      }
   }

   Statement statement() {
      if (peek().is(TokenKind::Insert)) unsupported(peek(), "INSERT in a model definition");
      expect(TokenKind::Create);
      if (accept(TokenKind::Table)) {
         CreateTable t = create_table();
         expect(TokenKind::Semicolon);
         return t;
      }
      if (accept(TokenKind::View)) {
         CreateView v;
         v.pos = peek().pos;
         v.name = expect(TokenKind::Identifier).text;
         expect(TokenKind::As);
         v.query = select();
         reject_unsupported_clause();
         expect(TokenKind::Semicolon);
         return v;
      }
      fail_expected({TokenKind::Table, TokenKind::View});
   }

   std::vector<std::string> identifier_list() {
      std::vector<std::string> names;
      expect(TokenKind::LParen);
      do {
         names.push_back(expect(TokenKind::Identifier).text);
      } while (accept(TokenKind::Comma));
      expect(TokenKind::RParen);
      return names;
   }

   CreateTable create_table() {
      CreateTable t;
      t.pos = peek().pos;
      t.name = expect(TokenKind::Identifier).text;
      expect(TokenKind::LParen);
      std::set<std::string> seen;
      do {
         if (accept(TokenKind::Primary)) {
            expect(TokenKind::Key);
            if (!t.primaryKey.empty()) throw SourceError(ErrorCode::ParseError, peek().pos, "duplicate PRIMARY KEY");
            const Token& at = peek();
            t.primaryKey = identifier_list();
            for (auto& k : t.primaryKey)
               if (!seen.count(k)) throw SourceError(ErrorCode::ParseError, at.pos, "primary key column '" + k + "' is not declared");
            continue;
         }
         const Token& nameTok = expect(TokenKind::Identifier);
         const Token& typeTok = expect(TokenKind::Identifier);
         auto type = lookup_type(typeTok.text);
         if (!type) throw SourceError(ErrorCode::ParseError, typeTok.pos, "unknown column type '" + typeTok.text + "'");
         if (iequals(typeTok.text, "DOUBLE") && peek().is(TokenKind::Identifier) && iequals(peek().text, "PRECISION")) take();
         if (peek().is(TokenKind::LParen) && *type == ColumnType::String) {
            take();
            expect(TokenKind::Number);
            expect(TokenKind::RParen);
         }
         if (!seen.insert(nameTok.text).second) throw SourceError(ErrorCode::ParseError, nameTok.pos, "duplicate column '" + nameTok.text + "'");
         t.columns.push_back({nameTok.text, *type});
         if (accept(TokenKind::Primary)) {
            expect(TokenKind::Key);
            if (!t.primaryKey.empty()) throw SourceError(ErrorCode::ParseError, peek().pos, "duplicate PRIMARY KEY");
            t.primaryKey = {nameTok.text};
         }
      } while (accept(TokenKind::Comma));
      expect(TokenKind::RParen);
      return t;
   }

   ColumnRef column_ref() {
      ColumnRef ref;
      ref.column = expect(TokenKind::Identifier).text;
      if (accept(TokenKind::Dot)) {
         ref.table = std::move(ref.column);
         ref.column = expect(TokenKind::Identifier).text;
      }
      return ref;
   }

   SelectQuery select() {
      const Token& selectTok = expect(TokenKind::Select);
      if (peek().is(TokenKind::Distinct)) unsupported(peek(), "DISTINCT");
      SelectQuery q;
      std::vector<SourcePos> projectionPos;
      do {
         projectionPos.push_back(peek().pos);
         Projection p;
         p.expr = expression();
         expect(TokenKind::As);
         p.alias = expect(TokenKind::Identifier).text;
         q.projections.push_back(std::move(p));
      } while (accept(TokenKind::Comma));

      expect(TokenKind::From);
      do {
         if (peek().is(TokenKind::LParen)) unsupported(peek(), "subquery");
         q.fromTables.push_back(expect(TokenKind::Identifier).text);
      } while (accept(TokenKind::Comma));

      if (accept(TokenKind::Where)) {
         do {
            if (peek().is(TokenKind::LParen) || peek().is(TokenKind::Not) || peek().is(TokenKind::Exists))
               unsupported(peek(), "predicate other than column equality");
            const Token& at = peek();
            if (!at.is(TokenKind::Identifier)) unsupported(at, "filter predicate (only column equalities)");
            JoinPredicate jp;
            jp.left = column_ref();
            const Token& op = peek();
            if (op.is(TokenKind::Less) || op.is(TokenKind::LessEqual) || op.is(TokenKind::Greater) ||
                op.is(TokenKind::GreaterEqual) || op.is(TokenKind::NotEqual) || op.is(TokenKind::In))
               unsupported(op, "non-equi join predicate");
            expect(TokenKind::Equal);
            if (!peek().is(TokenKind::Identifier)) unsupported(peek(), "filter against a constant");
            jp.right = column_ref();
            if (peek().is(TokenKind::Dot) || peek().is(TokenKind::Plus) || peek().is(TokenKind::Minus) || peek().is(TokenKind::Star) || peek().is(TokenKind::Slash))
               unsupported(peek(), "computed join predicate");
            q.joinPredicates.push_back(std::move(jp));
         } while (accept(TokenKind::And));
         if (peek().is(TokenKind::Or)) unsupported(peek(), "OR in WHERE");
      }

      if (accept(TokenKind::Group)) {
         expect(TokenKind::By);
         std::vector<ColumnRef> keys;
         do {
            keys.push_back(column_ref());
         } while (accept(TokenKind::Comma));
         q.groupBy = std::move(keys);
      }
      reject_unsupported_clause();

      resolve_local(q, selectTok);
      return q;
   }

   /// Qualify what can be qualified from the query alone and pick the
   /// numeric projection when it is syntactically evident.
   void resolve_local(SelectQuery& q, const Token& at) {
      std::size_t computed = 0;
      for (std::size_t i = 0; i < q.projections.size(); ++i)
         if (!q.projections[i].expr.is_column()) {
            ++computed;
            q.numericIndex = i;
         }
      if (computed > 1) throw SourceError(ErrorCode::ParseError, at.pos, "a view must have exactly one numeric expression, found " + std::to_string(computed));
      if (computed == 0) q.numericIndex = unresolvedNumeric;

      std::set<std::string> aliases;
      for (auto& p : q.projections)
         if (!aliases.insert(p.alias).second) throw SourceError(ErrorCode::ParseError, at.pos, "duplicate output column '" + p.alias + "'");

      if (q.groupBy) {
         for (auto& key : *q.groupBy) {
            if (!key.table.empty()) continue;
            for (auto& p : q.projections)
               if (p.alias == key.column && p.expr.is_column()) {
                  key = p.expr.column;
                  break;
               }
         }
      }
      if (q.fromTables.size() == 1) qualify_all(q, q.fromTables.front());

      std::set<std::string> from(q.fromTables.begin(), q.fromTables.end());
      if (from.size() != q.fromTables.size()) throw SourceError(ErrorCode::ParseError, at.pos, "a table appears twice in FROM (self joins are not supported)");
      auto check = [&](const ColumnRef& c) {
         if (!c.table.empty() && !from.count(c.table))
            throw SourceError(ErrorCode::ParseError, at.pos, "table '" + c.table + "' is not listed in FROM");
      };
      for_each_column(q, check);
   }

   static void qualify_all(SelectQuery& q, const std::string& table) {
      for_each_column(q, [&](ColumnRef& c) {
         if (c.table.empty()) c.table = table;
      });
   }

   NumericExpr expression() {
      if (++depth > maxNesting) throw SourceError(ErrorCode::ParseError, peek().pos, "expression nested too deeply");
      NumericExpr left = term();
      while (peek().is(TokenKind::Plus) || peek().is(TokenKind::Minus)) {
         BinaryOp op = take().is(TokenKind::Plus) ? BinaryOp::Add : BinaryOp::Sub;
         left = NumericExpr::binary(op, std::move(left), term());
      }
      --depth;
      return left;
   }

   static bool is_minus_one(const NumericExpr& e) {
      return e.kind == NumericExpr::Kind::Const && e.value == -1.0;
   }

   NumericExpr term() {
      NumericExpr left = unary();
      while (peek().is(TokenKind::Star) || peek().is(TokenKind::Slash)) {
         BinaryOp op = take().is(TokenKind::Star) ? BinaryOp::Mul : BinaryOp::Div;
         NumericExpr right = unary();
         if (op == BinaryOp::Mul && is_minus_one(left))
            left = NumericExpr::neg(std::move(right));
         else if (op == BinaryOp::Mul && is_minus_one(right))
            left = NumericExpr::neg(std::move(left));
         else
            left = NumericExpr::binary(op, std::move(left), std::move(right));
      }
      return left;
   }

   NumericExpr unary() {
      if (accept(TokenKind::Minus)) {
         if (peek().is(TokenKind::Number)) return NumericExpr::constant(-take().number);
         if (++depth > maxNesting) throw SourceError(ErrorCode::ParseError, peek().pos, "expression nested too deeply");
         NumericExpr inner = unary();
         --depth;
         return NumericExpr::neg(std::move(inner));
      }
      if (accept(TokenKind::Plus)) return unary();
      return primary();
   }

   NumericExpr primary() {
      const Token& t = peek();
      switch (t.kind) {
         case TokenKind::Number: take(); return NumericExpr::constant(t.number);
         case TokenKind::LParen: {
            take();
            if (peek().is(TokenKind::Select)) unsupported(peek(), "subquery");
            NumericExpr inner = expression();
            expect(TokenKind::RParen);
            return inner;
         }
         case TokenKind::Identifier: {
            if (peek(1).is(TokenKind::LParen)) return call();
            ColumnRef c = column_ref();
            return NumericExpr::column_ref(std::move(c.table), std::move(c.column));
         }
         case TokenKind::Case: unsupported(t, "CASE expression in a model definition");
         case TokenKind::String: unsupported(t, "string literal in a numeric expression");
         default: fail_expected({TokenKind::Number, TokenKind::Identifier, TokenKind::LParen, TokenKind::Minus});
      }
   }

   NumericExpr call() {
      const Token& nameTok = take();
      auto f = lookup_function(nameTok.text);
      if (!f) unsupported(nameTok, "function '" + nameTok.text + "'");
      expect(TokenKind::LParen);
      if (peek().is(TokenKind::Select)) unsupported(peek(), "subquery");
      if (peek().is(TokenKind::Star)) unsupported(peek(), std::string(function_name(*f)) + "(*)");
      if (peek().is(TokenKind::Distinct)) unsupported(peek(), "DISTINCT inside an aggregate");
      if (++depth > maxNesting) throw SourceError(ErrorCode::ParseError, peek().pos, "expression nested too deeply");
      std::vector<NumericExpr> args;
      do {
         args.push_back(expression());
      } while (accept(TokenKind::Comma));
      --depth;
      expect(TokenKind::RParen);

      std::size_t arity = *f == Function::Pow ? 2 : 1;
      if (args.size() != arity)
         throw SourceError(ErrorCode::ParseError, nameTok.pos, std::string(function_name(*f)) + " takes " + std::to_string(arity) + " argument(s)");
      if (*f == Function::Pow && !(args[1].kind == NumericExpr::Kind::Const && args[1].value == 2.0))
         unsupported(nameTok, "POW with an exponent other than the constant 2");
      if (is_aggregate(*f) && args[0].contains_aggregate())
         throw SourceError(ErrorCode::ParseError, nameTok.pos, "nested aggregate in " + std::string(function_name(*f)));
      return NumericExpr::call(*f, std::move(args));
   }

   public:
   static constexpr std::size_t unresolvedNumeric = static_cast<std::size_t>(-1);

   template <typename Q, typename F>
   static void for_each_column(Q& q, F&& f) {
      auto visit = [&](auto& self, auto& e) -> void {
         if (e.kind == NumericExpr::Kind::Column) f(e.column);
         for (auto& a : e.args) self(self, a);
      };
      for (auto& p : q.projections) visit(visit, p.expr);
      for (auto& jp : q.joinPredicates) {
         f(jp.left);
         f(jp.right);
      }
      if (q.groupBy)
         for (auto& key : *q.groupBy) f(key);
   }
};

/// What the parser knows about a relation's output columns
struct RelationInfo {
   std::vector<std::string> columns;
   std::set<std::string> valueColumns;
};

/// Script-level resolution: unqualified names against known relations and
/// the numeric projection of views whose outputs are all bare columns.
void resolve_script(SqlScript& script) {
   std::map<std::string, RelationInfo> known;
   for (auto& s : script.statements) {
      if (auto* t = std::get_if<CreateTable>(&s)) {
         if (known.count(t->name)) throw SourceError(ErrorCode::ParseError, t->pos, "duplicate relation name '" + t->name + "'");
         RelationInfo info;
         for (auto& c : t->columns) {
            info.columns.push_back(c.name);
            bool inKey = std::find(t->primaryKey.begin(), t->primaryKey.end(), c.name) != t->primaryKey.end();
            if (c.type != ColumnType::String && !inKey) info.valueColumns.insert(c.name);
         }
         known[t->name] = std::move(info);
         continue;
      }
      auto& v = std::get<CreateView>(s);
      if (known.count(v.name)) throw SourceError(ErrorCode::ParseError, v.pos, "duplicate relation name '" + v.name + "'");
      SelectQuery& q = v.query;

      Parser::for_each_column(q, [&](ColumnRef& c) {
         if (!c.table.empty()) return;
         std::vector<std::string> owners;
         for (auto& from : q.fromTables) {
            auto it = known.find(from);
            if (it != known.end() && std::count(it->second.columns.begin(), it->second.columns.end(), c.column)) owners.push_back(from);
         }
         if (owners.size() != 1)
            throw SourceError(ErrorCode::ParseError, v.pos, (owners.empty() ? "unknown column '" : "ambiguous column '") + c.column + "' in view '" + v.name + "'");
         c.table = owners.front();
      });

      if (q.numericIndex == Parser::unresolvedNumeric) {
         std::vector<std::size_t> candidates;
         for (std::size_t i = 0; i < q.projections.size(); ++i) {
            auto& ref = q.projections[i].expr.column;
            auto it = known.find(ref.table);
            if (it != known.end() && it->second.valueColumns.count(ref.column)) candidates.push_back(i);
         }
         if (candidates.size() != 1)
            throw SourceError(ErrorCode::ParseError, v.pos, "view '" + v.name + "' must have exactly one numeric expression, found " + std::to_string(candidates.size()));
         q.numericIndex = candidates.front();
      }

      RelationInfo info;
      for (auto& p : q.projections) info.columns.push_back(p.alias);
      info.valueColumns.insert(q.numeric_projection().alias);
      known[v.name] = std::move(info);
   }
}

}

SqlScript parse_script(std::span<const Token> tokens) {
   Parser parser(tokens);
   SqlScript script = parser.script();
   resolve_script(script);
   return script;
}

SqlScript parse_script_text(std::string_view text) {
   auto tokens = tokenize(text);
   return parse_script(tokens);
}

SelectQuery parse_select(std::span<const Token> tokens) {
   Parser parser(tokens);
   SelectQuery q = parser.standalone_select();
   if (q.numericIndex == Parser::unresolvedNumeric)
      throw SourceError(ErrorCode::ParseError, tokens.front().pos, "a view must have exactly one numeric expression, found 0");
   return q;
}

const NumericExpr& extract_numeric_expr(const SelectQuery& q) {
   return q.numeric_projection().expr;
}

}
