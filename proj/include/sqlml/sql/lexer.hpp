#pragma once

#include "sqlml/errors.hpp"
#include <string>
#include <string_view>
#include <vector>

namespace sqlml::sql {

enum class TokenKind {
   // keywords
   Create,
   Table,
   View,
   As,
   Select,
   From,
   Where,
   And,
   Group,
   By,
   Primary,
   Key,
   Case,
   When,
   Then,
   Else,
   End,
   Insert,
   Into,
   Values,
   Null,
   // recognised only so the parser can reject them with a precise message
   Order,
   Having,
   Join,
   On,
   Or,
   Not,
   In,
   Exists,
   Limit,
   Distinct,
   Union,
   // everything else
   Identifier,
   Number,
   String,
   LParen,
   RParen,
   Comma,
   Semicolon,
   Dot,
   Star,
   Slash,
   Plus,
   Minus,
   Equal,
   NotEqual,
   Less,
   LessEqual,
   Greater,
   GreaterEqual,
   EndOfInput,
};

std::string_view token_kind_name(TokenKind kind);

struct Token {
   TokenKind kind;
   /// Source text of the token; for identifiers the original spelling,
   /// for strings the unescaped contents
   std::string text;
   double number = 0;
   SourcePos pos;

   bool is(TokenKind k) const { return kind == k; }
};

/// Split SQL text into tokens. Keywords are matched case-insensitively,
/// `--` starts a comment running to the end of the line. The result always
/// ends with an EndOfInput token. Throws SourceError(LexError).
std::vector<Token> tokenize(std::string_view text);

}
