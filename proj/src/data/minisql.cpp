#include "sqlml/data/minisql.hpp"
#include "sqlml/errors.hpp"
#include "sqlml/sql/lexer.hpp"
#include <algorithm>
#include <cctype>
#include <memory>

namespace sqlml::data {

namespace {

using sql::Token;
using sql::TokenKind;

struct MExpr {
   enum class Kind { Column, Literal, Case, Call };
   Kind kind = Kind::Literal;
   std::string table, column;
   Value literal;
   std::string func;
   /// Case: when-left, when-right, then, optional else
   std::vector<MExpr> args;
   /// Resolved position of a column in the joined row
   std::size_t rel = 0, col = 0;
};

struct MItem {
   MExpr expr;
   std::string alias;
};

struct MSelect;

struct MFrom {
   std::string table;
   std::string alias;
   std::shared_ptr<MSelect> subquery;
};

struct MSelect {
   std::vector<MItem> items;
   std::vector<MFrom> from;
   std::vector<std::pair<MExpr, MExpr>> where;
   std::vector<MExpr> groupBy;
};

std::string upper(std::string s) {
   for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
   return s;
}

bool is_aggregate(const std::string& f) { return f == "SUM" || f == "MAX" || f == "MIN" || f == "COUNT"; }

bool has_aggregate(const MExpr& e) {
   if (e.kind == MExpr::Kind::Call && is_aggregate(e.func)) return true;
   return std::any_of(e.args.begin(), e.args.end(), has_aggregate);
}

class MParser {
   public:
   explicit MParser(std::vector<Token> t) : tokens(std::move(t)) {}

   MSelect select() {
      expect(TokenKind::Select, "SELECT");
      MSelect q;
      do {
         MItem item;
         item.expr = expr();
         if (accept(TokenKind::As)) item.alias = ident();
         q.items.push_back(std::move(item));
      } while (accept(TokenKind::Comma));
      expect(TokenKind::From, "FROM");
      do {
         MFrom f;
         if (accept(TokenKind::LParen)) {
            f.subquery = std::make_shared<MSelect>(select());
            expect(TokenKind::RParen, ")");
            accept(TokenKind::As);
            f.alias = ident();
         } else {
            f.table = ident();
            f.alias = f.table;
            if (accept(TokenKind::As)) f.alias = ident();
            else if (peek().is(TokenKind::Identifier)) f.alias = ident();
         }
         q.from.push_back(std::move(f));
      } while (accept(TokenKind::Comma));
      if (accept(TokenKind::Where)) {
         do {
            auto l = expr();
            expect(TokenKind::Equal, "=");
            q.where.emplace_back(std::move(l), expr());
         } while (accept(TokenKind::And));
      }
      if (accept(TokenKind::Group)) {
         expect(TokenKind::By, "BY");
         do q.groupBy.push_back(column_ref());
         while (accept(TokenKind::Comma));
      }
      return q;
   }

   void finish() {
      accept(TokenKind::Semicolon);
      if (!peek().is(TokenKind::EndOfInput)) fail("end of query");
   }

   const Token& peek() const { return tokens[pos]; }
   bool accept(TokenKind k) {
      if (!peek().is(k)) return false;
      ++pos;
      return true;
   }
   void expect(TokenKind k, const char* what) {
      if (!accept(k)) fail(what);
   }
   [[noreturn]] void fail(const std::string& what) const {
      throw SourceError(ErrorCode::ParseError, peek().pos, "expected " + what + ", got '" + peek().text + "'");
   }
   std::string ident() {
      if (!peek().is(TokenKind::Identifier)) fail("identifier");
      return tokens[pos++].text;
   }

   Value literal() {
      bool negative = accept(TokenKind::Minus);
      if (peek().is(TokenKind::Number)) {
         auto& t = tokens[pos++];
         bool integral = t.text.find_first_of(".eE") == std::string::npos;
         if (integral && !(negative && t.number == 0)) return negative ? -static_cast<std::int64_t>(t.number) : static_cast<std::int64_t>(t.number);
         return negative ? -t.number : t.number;
      }
      if (negative) fail("number");
      if (peek().is(TokenKind::String)) return tokens[pos++].text;
      if (accept(TokenKind::Null)) return std::monostate{};
      fail("literal");
   }

   MExpr column_ref() {
      MExpr e;
      e.kind = MExpr::Kind::Column;
      e.column = ident();
      if (accept(TokenKind::Dot)) {
         e.table = e.column;
         e.column = ident();
      }
      return e;
   }

   MExpr expr() {
      if (accept(TokenKind::Case)) {
         MExpr e;
         e.kind = MExpr::Kind::Case;
         expect(TokenKind::When, "WHEN");
         e.args.push_back(expr());
         expect(TokenKind::Equal, "=");
         e.args.push_back(expr());
         expect(TokenKind::Then, "THEN");
         e.args.push_back(expr());
         if (accept(TokenKind::Else)) e.args.push_back(expr());
         expect(TokenKind::End, "END");
         return e;
      }
      if (peek().is(TokenKind::Identifier) && tokens[pos + 1].is(TokenKind::LParen)) {
         MExpr e;
         e.kind = MExpr::Kind::Call;
         e.func = upper(ident());
         expect(TokenKind::LParen, "(");
         do e.args.push_back(expr());
         while (accept(TokenKind::Comma));
         expect(TokenKind::RParen, ")");
         if (e.func != "COALESCE" && !is_aggregate(e.func)) throw Error(ErrorCode::ParseError, "unsupported function " + e.func);
         if (is_aggregate(e.func) && e.args.size() != 1) throw Error(ErrorCode::ParseError, e.func + " takes one argument");
         return e;
      }
      if (peek().is(TokenKind::Identifier)) return column_ref();
      MExpr e;
      e.kind = MExpr::Kind::Literal;
      e.literal = literal();
      return e;
   }

   std::vector<Token> tokens;
   std::size_t pos = 0;
};

/// One joined row: a row index per FROM relation
using JoinedRow = std::vector<std::size_t>;

class Executor {
   public:
   Executor(const Database& d, EvalCounters* c) : db(d), counters(c) {}

   Relation run(MSelect& q) {
      std::vector<Relation> owned;
      std::vector<const Relation*> rels;
      owned.reserve(q.from.size());
      for (auto& f : q.from) {
         if (f.subquery) {
            owned.push_back(run(*f.subquery));
            owned.back().name = f.alias;
            rels.push_back(&owned.back());
         } else {
            auto it = db.find(f.table);
            if (it == db.end()) throw Error(ErrorCode::UnknownTable, "unknown table '" + f.table + "'");
            rels.push_back(&it->second);
         }
      }
      for (std::size_t i = 0; i < q.from.size(); ++i)
         for (std::size_t j = 0; j < i; ++j)
            if (q.from[i].alias == q.from[j].alias) throw Error(ErrorCode::ParseError, "duplicate FROM alias '" + q.from[i].alias + "'");

      auto resolve_all = [&](MExpr& e, auto& self) -> void {
         if (e.kind == MExpr::Kind::Column) resolve(e, q, rels);
         for (auto& a : e.args) self(a, self);
      };
      for (auto& it : q.items) resolve_all(it.expr, resolve_all);
      for (auto& [l, r] : q.where) resolve_all(l, resolve_all), resolve_all(r, resolve_all);
      for (auto& g : q.groupBy) resolve_all(g, resolve_all);

      // Left-deep nested loop join, applying each predicate once both sides are bound
      std::vector<JoinedRow> rows{JoinedRow{}};
      for (std::size_t j = 0; j < rels.size(); ++j) {
         std::vector<const std::pair<MExpr, MExpr>*> preds;
         for (auto& p : q.where)
            if (max_rel(p.first) <= j && max_rel(p.second) <= j && (max_rel(p.first) == j || max_rel(p.second) == j)) preds.push_back(&p);
         std::vector<JoinedRow> next;
         for (auto& partial : rows)
            for (std::size_t r = 0; r < rels[j]->rows.size(); ++r) {
               JoinedRow row = partial;
               row.push_back(r);
               bool ok = true;
               for (auto* p : preds) {
                  auto a = eval(p->first, row, rels), b = eval(p->second, row, rels);
                  if (is_null(a) || is_null(b) || !value_equal(a, b)) {
                     ok = false;
                     break;
                  }
               }
               if (ok) next.push_back(std::move(row));
            }
         rows = std::move(next);
      }
      if (counters) counters->joinedRows += rows.size();

      Relation out;
      for (std::size_t i = 0; i < q.items.size(); ++i) {
         auto& it = q.items[i];
         out.columns.push_back(!it.alias.empty() ? it.alias : it.expr.kind == MExpr::Kind::Column ? it.expr.column : "expr" + std::to_string(i + 1));
      }
      bool grouped = !q.groupBy.empty() || std::any_of(q.items.begin(), q.items.end(), [](auto& i) { return has_aggregate(i.expr); });
      if (!grouped) {
         for (auto& row : rows) {
            std::vector<Value> v;
            for (auto& it : q.items) v.push_back(eval(it.expr, row, rels));
            out.rows.push_back(std::move(v));
         }
         return out;
      }

      auto keyLess = [](const std::vector<Value>& a, const std::vector<Value>& b) {
         return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), value_less);
      };
      std::map<std::vector<Value>, std::vector<std::size_t>, decltype(keyLess)> groups(keyLess);
      for (std::size_t r = 0; r < rows.size(); ++r) {
         std::vector<Value> key;
         for (auto& g : q.groupBy) key.push_back(eval(g, rows[r], rels));
         groups[key].push_back(r);
      }
      if (groups.empty() && q.groupBy.empty()) groups[{}];
      for (auto& [key, members] : groups) {
         std::vector<Value> v;
         for (auto& it : q.items) {
            if (has_aggregate(it.expr) && counters) ++counters->aggregateCells;
            v.push_back(eval_grouped(it.expr, members, rows, rels));
         }
         out.rows.push_back(std::move(v));
      }
      return out;
   }

   private:
   const Database& db;
   EvalCounters* counters;

   static std::size_t max_rel(const MExpr& e) {
      std::size_t m = 0;
      if (e.kind == MExpr::Kind::Column) m = e.rel;
      for (auto& a : e.args) m = std::max(m, max_rel(a));
      return m;
   }

   static void resolve(MExpr& e, const MSelect& q, const std::vector<const Relation*>& rels) {
      std::vector<std::pair<std::size_t, std::size_t>> hits;
      for (std::size_t r = 0; r < rels.size(); ++r) {
         if (!e.table.empty() && q.from[r].alias != e.table) continue;
         if (auto c = rels[r]->find_column(e.column)) hits.emplace_back(r, *c);
      }
      std::string name = e.table.empty() ? e.column : e.table + "." + e.column;
      if (hits.empty()) throw Error(ErrorCode::SchemaMismatch, "unknown column '" + name + "'");
      if (hits.size() > 1) throw Error(ErrorCode::ParseError, "ambiguous column '" + name + "'");
      e.rel = hits[0].first;
      e.col = hits[0].second;
   }

   Value eval(const MExpr& e, const JoinedRow& row, const std::vector<const Relation*>& rels) {
      switch (e.kind) {
         case MExpr::Kind::Literal: return e.literal;
         case MExpr::Kind::Column: return rels[e.rel]->rows[row[e.rel]][e.col];
         case MExpr::Kind::Case: {
            if (counters) ++counters->caseEvaluations;
            auto a = eval(e.args[0], row, rels), b = eval(e.args[1], row, rels);
            if (!is_null(a) && !is_null(b) && value_equal(a, b)) return eval(e.args[2], row, rels);
            return e.args.size() > 3 ? eval(e.args[3], row, rels) : Value{};
         }
         case MExpr::Kind::Call:
            if (e.func == "COALESCE") {
               for (auto& a : e.args) {
                  auto v = eval(a, row, rels);
                  if (!is_null(v)) return v;
               }
               return Value{};
            }
            throw Error(ErrorCode::ParseError, "aggregate " + e.func + " outside a grouped query");
      }
      return Value{};
   }

   Value eval_grouped(const MExpr& e, const std::vector<std::size_t>& members, const std::vector<JoinedRow>& rows, const std::vector<const Relation*>& rels) {
      if (e.kind == MExpr::Kind::Call && is_aggregate(e.func)) {
         std::vector<Value> vals;
         for (auto m : members) {
            auto v = eval(e.args[0], rows[m], rels);
            if (!is_null(v)) vals.push_back(std::move(v));
         }
         if (e.func == "COUNT") return static_cast<std::int64_t>(vals.size());
         if (vals.empty()) return Value{};
         if (e.func == "MAX") return *std::max_element(vals.begin(), vals.end(), value_less);
         if (e.func == "MIN") return *std::min_element(vals.begin(), vals.end(), value_less);
         bool allInt = true;
         std::int64_t isum = 0;
         double dsum = 0;
         for (auto& v : vals) {
            auto d = as_double(v);
            if (!d) throw Error(ErrorCode::NonNumericValue, "SUM over a string value");
            if (auto* i = std::get_if<std::int64_t>(&v)) isum += *i;
            else allInt = false;
            dsum += *d;
         }
         if (allInt) return isum;
         return dsum;
      }
      if (e.kind == MExpr::Kind::Call && e.func == "COALESCE") {
         for (auto& a : e.args) {
            auto v = eval_grouped(a, members, rows, rels);
            if (!is_null(v)) return v;
         }
         return Value{};
      }
      if (has_aggregate(e)) throw Error(ErrorCode::ParseError, "aggregate nested in an expression");
      if (members.empty()) return Value{};
      return eval(e, rows[members.front()], rels);
   }
};

}

Relation execute_select(std::string_view text, const Database& db, EvalCounters* counters) {
   MParser p(sql::tokenize(text));
   MSelect q = p.select();
   p.finish();
   Executor ex(db, counters);
   Relation r = ex.run(q);
   r.name = "result";
   return r;
}

void execute_inserts(std::string_view text, Database& db) {
   MParser p(sql::tokenize(text));
   while (!p.peek().is(TokenKind::EndOfInput)) {
      p.expect(TokenKind::Insert, "INSERT");
      p.expect(TokenKind::Into, "INTO");
      std::string table = p.ident();
      std::vector<std::string> cols;
      p.expect(TokenKind::LParen, "(");
      do cols.push_back(p.ident());
      while (p.accept(TokenKind::Comma));
      p.expect(TokenKind::RParen, ")");
      p.expect(TokenKind::Values, "VALUES");
      auto it = db.find(table);
      if (it == db.end()) {
         Relation r;
         r.name = table;
         r.columns = cols;
         it = db.emplace(table, std::move(r)).first;
      }
      auto& rel = it->second;
      std::vector<std::size_t> idx;
      for (auto& c : cols) idx.push_back(rel.column_index(c));
      do {
         p.expect(TokenKind::LParen, "(");
         std::vector<Value> row(rel.columns.size());
         std::size_t i = 0;
         do {
            if (i >= idx.size()) p.fail(")");
            row[idx[i++]] = p.literal();
         } while (p.accept(TokenKind::Comma));
         if (i != idx.size()) throw Error(ErrorCode::LengthMismatch, "INSERT into '" + table + "' lists " + std::to_string(idx.size()) + " columns but " + std::to_string(i) + " values");
         p.expect(TokenKind::RParen, ")");
         rel.rows.push_back(std::move(row));
      } while (p.accept(TokenKind::Comma));
      p.expect(TokenKind::Semicolon, ";");
   }
}

}
