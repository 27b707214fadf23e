#include "ntekit/common.hpp"

#include <string>

namespace ntekit {

std::string_view to_string(Tag tag) {
  switch (tag) {
    case Tag::B: return "B";
    case Tag::I: return "I";
    case Tag::O: return "O";
  }
  return "O";
}

std::string_view to_string(Role role) {
  return role == Role::user ? "user" : "assistant";
}

std::string_view to_string(Stage stage) {
  return stage == Stage::pretrain ? "pretrain" : "posttrain";
}

std::string_view to_string(Polarity polarity) {
  return polarity == Polarity::positive ? "positive" : "negative";
}

Tag parse_tag(std::string_view text) {
  if (text == "B") return Tag::B;
  if (text == "I") return Tag::I;
  if (text == "O") return Tag::O;
  throw DataError("unknown tag " + std::string(text));
}

Role parse_role(std::string_view text) {
  std::string lowered(text);
  for (char& c : lowered) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  if (lowered == "user") return Role::user;
  if (lowered == "assistant") return Role::assistant;
  throw DataError("unknown role " + std::string(text));
}

Stage parse_stage(std::string_view text) {
  if (text == "pretrain") return Stage::pretrain;
  if (text == "posttrain") return Stage::posttrain;
  throw DataError("unknown stage " + std::string(text));
}

Polarity parse_polarity(std::string_view text) {
  if (text == "positive") return Polarity::positive;
  if (text == "negative") return Polarity::negative;
  throw DataError("unknown polarity " + std::string(text));
}

}  // namespace ntekit
