#pragma once

// LLM prompt templates. Placeholders are written <name> and are substituted
// in a single pass, so substituted text is never re-scanned.

#include <map>
#include <string>
#include <string_view>

namespace sane::prompts {

// Placeholders: <N>, <caption>, <c>
inline constexpr std::string_view kDecomposition =
    "You are a helpful assistant for image editing. I will provide you with a caption that describes an image, "
    "and an editing instruction that represents an ambiguous modification of the scene. Your task is to propose "
    "specific modifications. You can ask to add or replace elements in the scene, proposing consistent "
    "modification that agree with the ambiguous instruction.\n"
    "\n"
    "Be concise and output your instructions without further considerations or reasoning, one local "
    "modification per line. Do not output any other text than the suggested outputs, do not write "
    "\"suggested output:\".\n"
    "\n"
    "I am going to provide some examples now.\n"
    "Caption: a photo of a urban scenario, with cars.\n"
    "ambiguous instruction: make the scene vintage.\n"
    "Suggested output: replace the cars with old cars\n"
    "Caption: a photo of a dog running on the grass.\n"
    "ambiguous instruction: make it look funny.\n"
    "Suggested output: add a hat to the dog.\n"
    "\n"
    "The main subject of the scene must stay the same. For instance, if the photo is describing a cat as the "
    "main subject, you cannot replace the cat with another animal. You should NEVER remove elements. Only "
    "propose instructions targeting elements that appear in the caption, without imagining anything else.\n"
    "\n"
    "Now, provide <N> outputs for the following caption and subjective instruction. Caption: <caption> "
    "ambiguous instruction <c>";

// Placeholders: <c>, <x>
inline constexpr std::string_view kCaptioning =
    "I am going to provide an input image and an editing instruction. You should propose 1) a caption that "
    "describes accurately the input image, max 10 words, focusing only on visual content 2) a caption that "
    "encompasses how the image should look like after applying the instruction. The instruction is: <c>. The "
    "image is <x>.\n"
    "\n"
    "Try to keep these captions as compact as possible. The captions should be as similar as possible to each "
    "other.\n"
    "\n"
    "You should reply following the format:\n"
    "1. \"caption 1\"\n"
    "2. \"caption 2\"\n"
    "Just reply with the captions without reasoning or considerations.";

// Placeholders: <c>, <x>, <x_A>, <x_B>
inline constexpr std::string_view kPairwisePreference =
    "I'm going to provide three pictures and one editing textual instruction. The first is an original "
    "picture. The second and the third pictures are edited pictures, where image editing methods are applying "
    "transformations to the original picture by following the instruction. The image editing methods "
    "identifiers are A and B. You should tell me what is the editing method that produces the best edited "
    "image. For your evaluation, you should balance how much the edited image respects the instruction, the "
    "quality and realism of the generated image, and the content preservation from the original picture.\n"
    "\n"
    "Reply with A or B only without further text. The images are ordered in this way: original image, the "
    "image of method A, the image of method B.\n"
    "\n"
    "Now, provide your answer for the input images and the instruction: <c> images: <x>, <x_A>, <x_B>.";

// Placeholders: <c>. Quote characters and spelling are kept verbatim.
inline constexpr std::string_view kAmbiguitySelection =
    "You are a helpful assistant for image editing. I will provide you with an editing instruction that "
    "requires certain modification of the scene in the image. Your task is to decide whether this instruction "
    "represents an abstract instruction or a specific instruction.\n"
    "\n"
    "Here are some examples:\n"
    "ambiguous instruction: ‘Change the image so it apears old and musty.’\n"
    "ambiguous instruction: ‘Make it a snowy day.’\n"
    "ambiguous instruction: ‘Change the image so the players look like zombies.’\n"
    "Specific instruction: ’Add the word ‘tray’ in white to the bottom of the image.'\n"
    "Specific instruction: ‘Change the sheep into a calf.’\n"
    "Specific instruction: ‘Draw this in an oil painting style.’\n"
    "\n"
    "Now, tell me if the following instruction is ambiguous or specific. The instruction is: <c>.\n"
    "\n"
    "Before answering, motivate your decision by reasoning about the properties of this instruction.\n"
    "\n"
    "Your response should start with either ‘Response: ambiguous.’ or ‘Response: specific.";

// Replaces each <key> found in the template with values.at(key). Tokens that
// are not keys of the map are left untouched.
inline std::string render(std::string_view tpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tpl.size() + 64);
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '<') {
      const std::size_t close = tpl.find('>', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(tpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tpl[i++]);
  }
  return out;
}

inline std::string decomposition(std::string_view caption, std::string_view instruction, int n) {
  return render(kDecomposition,
                {{"N", std::to_string(n)}, {"caption", std::string(caption)}, {"c", std::string(instruction)}});
}

inline std::string captioning(std::string_view instruction, std::string_view image_ref) {
  return render(kCaptioning, {{"c", std::string(instruction)}, {"x", std::string(image_ref)}});
}

inline std::string pairwise_preference(std::string_view instruction, std::string_view original,
                                       std::string_view method_a, std::string_view method_b) {
  return render(kPairwisePreference, {{"c", std::string(instruction)},
                                      {"x", std::string(original)},
                                      {"x_A", std::string(method_a)},
                                      {"x_B", std::string(method_b)}});
}

inline std::string ambiguity_selection(std::string_view instruction) {
  return render(kAmbiguitySelection, {{"c", std::string(instruction)}});
}

}  // namespace sane::prompts
