#pragma once

#include <string>
#include <string_view>

#include <unicode/uchar.h>
#include <unicode/unistr.h>

namespace reattn {

namespace detail {

// Byte-level BPE space marker and SentencePiece word-boundary marker.
inline constexpr UChar32 kBpeSpace = 0x0120;
inline constexpr UChar32 kSentencePieceSpace = 0x2581;

inline bool is_leading_marker(UChar32 c) {
  return c == kBpeSpace || c == kSentencePieceSpace || u_isUWhiteSpace(c);
}

}  // namespace detail

/// Canonical matching form of a tokenizer token.
///
/// Leading subword/whitespace markers are stripped and the rest is Unicode
/// case folded. Tokens without any alphanumeric code point (punctuation,
/// whitespace) map to the empty string and never match anything.
inline std::string normalize_token(std::string_view surface) {
  icu::UnicodeString text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(surface.data(), static_cast<int32_t>(surface.size())));

  int32_t start = 0;
  while (start < text.length() && detail::is_leading_marker(text.char32At(start))) {
    start = text.moveIndex32(start, 1);
  }
  text.remove(0, start);
  text.foldCase(U_FOLD_CASE_DEFAULT);

  bool has_alnum = false;
  for (int32_t i = 0; i < text.length(); i = text.moveIndex32(i, 1)) {
    if (u_isalnum(text.char32At(i))) {
      has_alnum = true;
      break;
    }
  }
  if (!has_alnum) return {};

  std::string out;
  text.toUTF8String(out);
  return out;
}

}  // namespace reattn
