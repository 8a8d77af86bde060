#pragma once

#include <cctype>
#include <string>
#include <unordered_map>
#include <vector>

#include "socialfusion/common.hpp"

namespace socialfusion {

// Deterministic toy tokenizer for the desk-scale backbone. Word mode emits
// alphanumeric runs and single punctuation characters; char mode emits one
// token per byte (useful for exercising multi-token label scoring).
class Tokenizer {
 public:
  enum class Mode { Word, Char };

  static Tokenizer build(Mode mode, const std::vector<std::string>& corpus) {
    Tokenizer t;
    t.mode_ = mode;
    t.id_of_["<unk>"] = 0;
    t.token_of_.push_back("<unk>");
    for (const auto& text : corpus)
      for (const auto& piece : t.split(text))
        if (!t.id_of_.count(piece)) {
          t.id_of_[piece] = static_cast<int>(t.token_of_.size());
          t.token_of_.push_back(piece);
        }
    return t;
  }

  std::vector<int> encode(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& piece : split(text)) {
      auto it = id_of_.find(piece);
      ids.push_back(it == id_of_.end() ? 0 : it->second);
    }
    return ids;
  }

  int vocab_size() const { return static_cast<int>(token_of_.size()); }
  Mode mode() const { return mode_; }
  const std::string& token(int id) const { return token_of_.at(static_cast<std::size_t>(id)); }

 private:
  std::vector<std::string> split(const std::string& text) const {
    std::vector<std::string> out;
    if (mode_ == Mode::Char) {
      for (char c : text) out.emplace_back(1, c);
      return out;
    }
    std::size_t i = 0;
    while (i < text.size()) {
      unsigned char c = static_cast<unsigned char>(text[i]);
      if (c == ' ' || c == '\t' || c == '\r') {
        ++i;
      } else if (c == '\n') {
        out.emplace_back("\n");
        ++i;
      } else if (std::isalnum(c)) {
        std::size_t j = i;
        while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
        out.push_back(text.substr(i, j - i));
        i = j;
      } else {
        out.emplace_back(1, text[i]);
        ++i;
      }
    }
    return out;
  }

  Mode mode_ = Mode::Word;
  std::unordered_map<std::string, int> id_of_;
  std::vector<std::string> token_of_;
};

}  // namespace socialfusion
