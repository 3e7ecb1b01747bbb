#include "sqlml/sql/lexer.hpp"
#include <array>
#include <cctype>
#include <charconv>
#include <utility>

namespace sqlml::sql {

namespace {

constexpr std::array<std::pair<std::string_view, TokenKind>, 32> keywords{{
   {"CREATE", TokenKind::Create},
   {"TABLE", TokenKind::Table},
   {"VIEW", TokenKind::View},
   {"AS", TokenKind::As},
   {"SELECT", TokenKind::Select},
   {"FROM", TokenKind::From},
   {"WHERE", TokenKind::Where},
   {"AND", TokenKind::And},
   {"GROUP", TokenKind::Group},
   {"BY", TokenKind::By},
   {"PRIMARY", TokenKind::Primary},
   {"KEY", TokenKind::Key},
   {"CASE", TokenKind::Case},
   {"WHEN", TokenKind::When},
   {"THEN", TokenKind::Then},
   {"ELSE", TokenKind::Else},
   {"END", TokenKind::End},
   {"INSERT", TokenKind::Insert},
   {"INTO", TokenKind::Into},
   {"VALUES", TokenKind::Values},
   {"NULL", TokenKind::Null},
   {"ORDER", TokenKind::Order},
   {"HAVING", TokenKind::Having},
   {"JOIN", TokenKind::Join},
   {"ON", TokenKind::On},
   {"OR", TokenKind::Or},
   {"NOT", TokenKind::Not},
   {"IN", TokenKind::In},
   {"EXISTS", TokenKind::Exists},
   {"LIMIT", TokenKind::Limit},
   {"DISTINCT", TokenKind::Distinct},
   {"UNION", TokenKind::Union},
}};

bool iequals(std::string_view a, std::string_view b) {
   if (a.size() != b.size()) return false;
   for (std::size_t i = 0; i < a.size(); ++i)
      if (std::toupper(static_cast<unsigned char>(a[i])) != std::toupper(static_cast<unsigned char>(b[i]))) return false;
   return true;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }

class Lexer {
   public:
   explicit Lexer(std::string_view text) : text(text) {}

   std::vector<Token> run() {
      std::vector<Token> tokens;
      while (true) {
         skip_blanks();
         if (at_end()) {
            tokens.push_back({TokenKind::EndOfInput, "", 0, here});
            return tokens;
         }
         tokens.push_back(next());
      }
   }

   private:
   std::string_view text;
   SourcePos here;

   bool at_end() const { return here.offset >= text.size(); }
   char peek(std::size_t ahead = 0) const {
      return here.offset + ahead < text.size() ? text[here.offset + ahead] : '\0';
   }
   void advance() {
      if (text[here.offset] == '\n') {
         ++here.line;
         here.column = 1;
      } else {
         ++here.column;
      }
      ++here.offset;
   }

   void skip_blanks() {
      while (!at_end()) {
         char c = peek();
         if (std::isspace(static_cast<unsigned char>(c))) {
            advance();
         } else if (c == '-' && peek(1) == '-') {
            while (!at_end() && peek() != '\n') advance();
         } else {
            break;
         }
      }
   }

   Token make(TokenKind kind, SourcePos start) const {
      return {kind, std::string(text.substr(start.offset, here.offset - start.offset)), 0, start};
   }

   Token next() {
      SourcePos start = here;
      char c = peek();
      if (is_ident_start(c)) {
         while (!at_end() && is_ident_char(peek())) advance();
         Token tok = make(TokenKind::Identifier, start);
         for (auto& [word, kind] : keywords)
            if (iequals(word, tok.text)) {
               tok.kind = kind;
               break;
            }
         return tok;
      }
      if (is_digit(c) || (c == '.' && is_digit(peek(1)))) return number(start);
      if (c == '\'') return string(start);

      advance();
      switch (c) {
         case '(': return make(TokenKind::LParen, start);
         case ')': return make(TokenKind::RParen, start);
         case ',': return make(TokenKind::Comma, start);
         case ';': return make(TokenKind::Semicolon, start);
         case '.': return make(TokenKind::Dot, start);
         case '*': return make(TokenKind::Star, start);
         case '/': return make(TokenKind::Slash, start);
         case '+': return make(TokenKind::Plus, start);
         case '-': return make(TokenKind::Minus, start);
         case '=': return make(TokenKind::Equal, start);
         case '<':
            if (peek() == '=') {
               advance();
               return make(TokenKind::LessEqual, start);
            }
            if (peek() == '>') {
               advance();
               return make(TokenKind::NotEqual, start);
            }
            return make(TokenKind::Less, start);
         case '>':
            if (peek() == '=') {
               advance();
               return make(TokenKind::GreaterEqual, start);
            }
            return make(TokenKind::Greater, start);
         case '!':
            if (peek() == '=') {
               advance();
               return make(TokenKind::NotEqual, start);
            }
            break;
         default: break;
      }
      std::string shown = (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) >= 0x7f) ? "byte " + std::to_string(static_cast<unsigned char>(c)) : std::string(1, c);
      throw SourceError(ErrorCode::LexError, start, "illegal character '" + shown + "'");
   }

   Token number(SourcePos start) {
      while (is_digit(peek())) advance();
      if (peek() == '.') {
         advance();
         while (is_digit(peek())) advance();
      }
      if ((peek() == 'e' || peek() == 'E') && (is_digit(peek(1)) || ((peek(1) == '+' || peek(1) == '-') && is_digit(peek(2))))) {
         advance();
         if (peek() == '+' || peek() == '-') advance();
         while (is_digit(peek())) advance();
      }
      if (is_ident_start(peek())) throw SourceError(ErrorCode::LexError, here, "malformed number");
      Token tok = make(TokenKind::Number, start);
      auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), tok.number);
      if (ec != std::errc() || ptr != tok.text.data() + tok.text.size())
         throw SourceError(ErrorCode::LexError, start, "number out of range '" + tok.text + "'");
      return tok;
   }

   Token string(SourcePos start) {
      advance();
      std::string value;
      while (true) {
         if (at_end()) throw SourceError(ErrorCode::LexError, start, "unterminated string literal");
         char c = peek();
         advance();
         if (c == '\'') {
            if (peek() == '\'') {
               value.push_back('\'');
               advance();
               continue;
            }
            break;
         }
         value.push_back(c);
      }
      return {TokenKind::String, std::move(value), 0, start};
   }
};

}

std::string_view token_kind_name(TokenKind kind) {
   for (auto& [word, k] : keywords)
      if (k == kind) return word;
   switch (kind) {
      case TokenKind::Identifier: return "identifier";
      case TokenKind::Number: return "number";
      case TokenKind::String: return "string";
      case TokenKind::LParen: return "'('";
      case TokenKind::RParen: return "')'";
      case TokenKind::Comma: return "','";
      case TokenKind::Semicolon: return "';'";
      case TokenKind::Dot: return "'.'";
      case TokenKind::Star: return "'*'";
      case TokenKind::Slash: return "'/'";
      case TokenKind::Plus: return "'+'";
      case TokenKind::Minus: return "'-'";
      case TokenKind::Equal: return "'='";
      case TokenKind::NotEqual: return "'<>'";
      case TokenKind::Less: return "'<'";
      case TokenKind::LessEqual: return "'<='";
      case TokenKind::Greater: return "'>'";
      case TokenKind::GreaterEqual: return "'>='";
      case TokenKind::EndOfInput: return "end of input";
      default: return "keyword";
   }
}

std::vector<Token> tokenize(std::string_view text) {
   return Lexer(text).run();
}

}
