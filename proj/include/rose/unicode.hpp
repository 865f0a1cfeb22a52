#pragma once

#include <string>
#include <string_view>
#include <vector>

// Thin wrappers over ICU character properties. Invalid UTF-8 sequences decode
// to U+FFFD so every function here is total.
namespace rose::unicode {

std::u32string decode_utf8(std::string_view s);
void append_utf8(std::string& out, char32_t c);
std::string encode_utf8(std::u32string_view s);

char32_t fold_case(char32_t c);

// General categories Pc, Pd, Ps, Pe, Pi, Pf, Po.
bool is_punctuation(char32_t c);
bool is_letter(char32_t c);
bool is_letter_or_digit(char32_t c);
bool is_whitespace(char32_t c);
bool is_mark(char32_t c);

// Scripts written without spaces between words.
bool is_undelimited_script(char32_t c);

}  // namespace rose::unicode
