#include "promptgrid/templates.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace promptgrid {
namespace {

std::string read_scaffold(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::invalid_argument("template: cannot open " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (text.find('\r') != std::string::npos)
    throw std::invalid_argument("template: CR found; scaffolds are LF-only: " + file.string());
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

void require_slot_once(const std::string& scaffold, const std::string& slot,
                       const std::filesystem::path& file) {
  std::size_t first = scaffold.find(slot);
  if (first == std::string::npos)
    throw std::invalid_argument("template: missing slot " + slot + " in " + file.string());
  if (scaffold.find(slot, first + 1) != std::string::npos)
    throw std::invalid_argument("template: duplicate slot " + slot + " in " + file.string());
}

// One left-to-right pass over the scaffold; substituted values are never
// rescanned, so slot-like text inside a system message or question is inert.
std::string fill_slots(const std::string& scaffold,
                       const std::vector<std::pair<std::string, std::string_view>>& slots) {
  std::string out;
  out.reserve(scaffold.size() + 512);
  std::size_t pos = 0;
  while (pos < scaffold.size()) {
    std::size_t best = std::string::npos;
    const std::pair<std::string, std::string_view>* hit = nullptr;
    for (const auto& slot : slots) {
      std::size_t at = scaffold.find(slot.first, pos);
      if (at < best) {
        best = at;
        hit = &slot;
      }
    }
    if (!hit) {
      out.append(scaffold, pos, std::string::npos);
      break;
    }
    out.append(scaffold, pos, best - pos);
    out.append(hit->second);
    pos = best + hit->first.size();
  }
  return out;
}

}  // namespace

PromptTemplate PromptTemplate::load(const std::filesystem::path& scaffold_file, bool cot,
                                    std::span<const IclExample> examples) {
  if (examples.size() != 4)
    throw std::invalid_argument("template: need exactly 4 in-context examples, got " +
                                std::to_string(examples.size()));
  PromptTemplate tmpl;
  tmpl.cot = cot;
  tmpl.scaffold = read_scaffold(scaffold_file);

  require_slot_once(tmpl.scaffold, "{system}", scaffold_file);
  require_slot_once(tmpl.scaffold, "{question}", scaffold_file);
  require_slot_once(tmpl.scaffold, "{trailer}", scaffold_file);
  for (int i = 1; i <= 4; ++i) {
    require_slot_once(tmpl.scaffold, "{example_" + std::to_string(i) + "_question}", scaffold_file);
    require_slot_once(tmpl.scaffold, "{example_" + std::to_string(i) + "_answer}", scaffold_file);
  }

  for (std::size_t i = 0; i < 4; ++i) {
    if (examples[i].question.empty())
      throw std::invalid_argument("template: example " + std::to_string(i + 1) + " has no question");
    if (!normalize(examples[i].answer))
      throw std::invalid_argument("template: example " + std::to_string(i + 1) +
                                  " answer is not numeric: " + examples[i].answer);
    tmpl.examples[i] = examples[i];
  }
  return tmpl;
}

std::array<IclExample, 4> load_icl_examples(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("icl examples: cannot open " + file.string());
  nlohmann::json j = nlohmann::json::parse(in);
  if (!j.contains("examples") || !j["examples"].is_array() || j["examples"].size() != 4)
    throw std::invalid_argument("icl examples: need an 'examples' array of 4 entries");
  std::array<IclExample, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i].question = j["examples"][i].at("question").get<std::string>();
    out[i].answer = j["examples"][i].at("answer").get<std::string>();
  }
  return out;
}

std::array<IclExample, 4> default_icl_block(std::span<const QAItem> items) {
  if (items.size() < 4)
    throw DatasetError("in-context block: dataset has " + std::to_string(items.size()) +
                       " items, need >= 4");
  std::array<IclExample, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    const QAItem& item = items[items.size() - 4 + i];
    out[i] = IclExample{item.question, item.gold.str()};
  }
  return out;
}

RenderedPrompt render_prompt(const SystemMessage& system, const PromptTemplate& tmpl,
                             std::string_view question,
                             std::optional<std::string_view> answer_prefix,
                             std::string_view variant_id, int question_index) {
  if (question.empty()) throw std::invalid_argument("render_prompt: empty question");

  std::string_view trailer =
      answer_prefix ? *answer_prefix : (tmpl.cot ? kReasoningTrailer : kAnswerTrailer);
  std::vector<std::pair<std::string, std::string_view>> slots = {
      {"{system}", system.text},
      {"{question}", question},
      {"{trailer}", trailer},
  };
  for (int i = 1; i <= 4; ++i) {
    slots.emplace_back("{example_" + std::to_string(i) + "_question}",
                       tmpl.examples[i - 1].question);
    slots.emplace_back("{example_" + std::to_string(i) + "_answer}", tmpl.examples[i - 1].answer);
  }

  return RenderedPrompt{fill_slots(tmpl.scaffold, slots), std::string(variant_id), question_index};
}

}  // namespace promptgrid
