// Builds the bundled replay file for the mini dataset: one scripted
// completion per (variant, question, CoT mode) request. Completions are a
// pure function of the request digest, so regenerating the file is
// idempotent and replayed runs are fully deterministic.

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "promptgrid/client.hpp"
#include "promptgrid/dataset.hpp"
#include "promptgrid/snippets.hpp"
#include "promptgrid/templates.hpp"

using namespace promptgrid;

namespace {

std::string group_digits(const std::string& digits) {
  std::string out;
  int count = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (count && count % 3 == 0) out += ',';
    out += *it;
    ++count;
  }
  return {out.rbegin(), out.rend()};
}

// Digest-keyed outcome mix: mostly correct answers in assorted renderings,
// some wrong, some refusals. Nibbles of the hex digest drive the choice.
std::string scripted_completion(const std::string& digest, const CanonicalNumber& gold,
                                bool cot) {
  auto nibble = [&digest](int i) {
    char c = digest[i];
    return c <= '9' ? c - '0' : c - 'a' + 10;
  };
  const int outcome = nibble(0) % 10;  // 0..6 right, 7..8 wrong, 9 refusal
  const int style = nibble(1) % 4;

  if (outcome == 9) return "I cannot determine the answer to this question.";

  std::string shown;
  if (outcome >= 7) {
    shown = "9" + gold.integer_digits();  // provably different value
  } else {
    switch (style) {
      case 0: shown = gold.str(); break;
      case 1: shown = "$" + gold.str(); break;
      case 2:
        shown = gold.fraction_digits().empty() ? group_digits(gold.integer_digits())
                                               : gold.str();
        break;
      default:
        shown = gold.fraction_digits().empty() ? gold.str() + ".00" : gold.str();
        break;
    }
  }

  if (cot)
    return " work through the steps. We compute the quantities and combine them.\nAnswer: " +
           shown + "</s>";
  return " " + shown + "</s>";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generate the bundled replay completions for the mini dataset"};
  std::filesystem::path dataset = "data/replay/mini_dataset.jsonl";
  std::filesystem::path template_dir = "data/templates";
  std::filesystem::path out_path = "data/replay/replay_completions.jsonl";
  std::string model = "replay-model";
  int questions = 10;
  app.add_option("--dataset", dataset);
  app.add_option("--templates", template_dir);
  app.add_option("--out", out_path);
  app.add_option("--model", model);
  app.add_option("--questions", questions);
  CLI11_PARSE(app, argc, argv);

  try {
    const std::vector<QAItem> items = load_dataset(dataset);
    const SplitPlan splits = make_splits(items, questions, 0);
    const std::array<IclExample, 4> icl = default_icl_block(items);
    const SnippetSet snippets = SnippetSet::defaults();
    const DecodingParams decoding;

    ReplayBackend replay;
    for (bool cot : {false, true}) {
      const PromptTemplate tmpl = PromptTemplate::load(
          template_dir / (cot ? "with_cot.tmpl" : "sans_cot.tmpl"), cot, icl);
      for (const PromptVariant& variant : enumerate_variants(snippets, {cot})) {
        const SystemMessage system = assemble_system_message(snippets, variant);
        for (const QAItem& item : splits.eval) {
          const RenderedPrompt prompt =
              render_prompt(system, tmpl, item.question, std::nullopt, variant.id(), item.index);
          const std::string digest =
              CompletionRequest{model, prompt.text, decoding}.digest();
          replay.add(digest, scripted_completion(digest, item.gold, cot));
        }
      }
    }
    replay.save(out_path);
    std::cout << "wrote " << replay.size() << " completions to " << out_path.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
