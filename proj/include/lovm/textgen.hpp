#pragma once
// LLM-backed generation of the caption and synonym text datasets over an
// OpenAI-compatible chat-completions endpoint.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lovm/datastore.hpp"

namespace lovm {

enum class TextKind { Captions, Synonyms };

TextKind parse_text_kind(const std::string& text);
std::string to_string(TextKind kind);

// Sampling temperature per kind: 1.0 for captions, 0.1 for synonyms.
double temperature_for(TextKind kind) noexcept;

struct TextDataset {
  TextKind kind = TextKind::Captions;
  std::vector<std::string> class_names;
  std::vector<std::vector<std::string>> texts;  // aligned with class_names
};

void validate(const TextDataset& ds);
void write_text_dataset(const TextDataset& ds, const std::filesystem::path& path);
TextDataset load_text_dataset(const std::filesystem::path& path);

std::string build_caption_prompt(const TaskSpec& spec, const std::string& class_name);
std::string build_synonym_prompt(const std::string& class_name);

// Splits an LLM reply into items: one per line, leading "N." / "N)" / "-" /
// "*" markers and surrounding whitespace stripped, blank lines dropped.
std::vector<std::string> parse_list_response(std::string_view text);
// Synonym replies may also come back as "name: [a, b, c]"; bracketed lists
// are split on commas.
std::vector<std::string> parse_synonym_response(std::string_view text);
// Inverse of parse_list_response for marker-free items: "1. a\n2. b\n".
std::string render_numbered(const std::vector<std::string>& items);

struct LlmClientConfig {
  // Base URL, e.g. "https://api.openai.com/v1"; requests go to
  // {endpoint}/chat/completions.
  std::string endpoint;
  std::string model = "gpt-3.5-turbo-0301";
  std::string api_key;  // sent as a bearer token when non-empty
  std::size_t max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{120};
  std::size_t parallelism = 4;

  // Fills api_key from LOVM_LLM_API_KEY.
  static LlmClientConfig from_env(std::string endpoint);
};

// One chat-completion round trip with retry and exponential backoff.
// Returns choices[0].message.content.
std::string chat_completion(const LlmClientConfig& cfg, const std::string& prompt, double temperature);

// One request per class; throws EmptyParse naming the class whose reply
// yielded no items.
TextDataset generate_text_dataset(const TaskSpec& spec, TextKind kind, const LlmClientConfig& cfg);

}  // namespace lovm
