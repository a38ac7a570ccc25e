#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "promptgrid/dataset.hpp"
#include "promptgrid/snippets.hpp"

namespace promptgrid {

/// Default trailers for the target-question block. An optimizer answer
/// prefix, when present, replaces the trailer wholesale.
inline constexpr std::string_view kAnswerTrailer = "Answer:";
inline constexpr std::string_view kReasoningTrailer =
    "Reasoning: Let's think step by step in order to";

struct IclExample {
  std::string question;
  std::string answer;  // the numeric string shown after "Answer:"
};

/// A request scaffold with exactly four in-context examples. The scaffold
/// text comes from a resource file and carries the named slots {system},
/// {example_i_question}, {example_i_answer} (i in 1..4), {question} and
/// {trailer}; everything else is fixed bytes.
struct PromptTemplate {
  bool cot = false;
  std::string scaffold;
  std::array<IclExample, 4> examples;

  /// Loads a scaffold file (UTF-8, LF; one trailing newline is dropped) and
  /// checks every slot appears exactly once. Example answers must
  /// canonicalize, since they are what the match contract trains on.
  static PromptTemplate load(const std::filesystem::path& scaffold_file, bool cot,
                             std::span<const IclExample> examples);
};

/// Loads the four default in-context examples bundled alongside the
/// scaffold files ("icl_examples.json").
std::array<IclExample, 4> load_icl_examples(const std::filesystem::path& file);

/// The fixed in-context block: the final four items of the dataset, in
/// dataset order. Throws DatasetError when fewer than four items exist.
std::array<IclExample, 4> default_icl_block(std::span<const QAItem> items);

struct RenderedPrompt {
  std::string text;
  std::string variant_id;  // grid variant id or a candidate tag
  int question_index = -1;
};

/// Pure byte-level rendering: system message, the four example blocks, then
/// the target question terminated by the trailer (or by `answer_prefix`
/// when given). Rejects an empty question.
RenderedPrompt render_prompt(const SystemMessage& system, const PromptTemplate& tmpl,
                             std::string_view question,
                             std::optional<std::string_view> answer_prefix = std::nullopt,
                             std::string_view variant_id = "", int question_index = -1);

}  // namespace promptgrid
