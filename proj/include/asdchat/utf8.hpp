#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace asdchat::utf8 {

/// Decodes UTF-8 into code points. Invalid bytes decode as U+FFFD.
std::vector<char32_t> decode(std::string_view text);
void append(std::string& out, char32_t cp);

std::size_t length(std::string_view text);

bool is_cjk(char32_t cp) noexcept;
/// Latin-script letters (ASCII and Latin-1/Extended-A/B) and ASCII digits.
bool is_latin_alnum(char32_t cp) noexcept;

}  // namespace asdchat::utf8
