#include "vild/prompts.hpp"

#include <array>
#include <cctype>

namespace vild {

namespace {

constexpr std::array<std::string_view, 63> kTemplates = {
    "There is {article} {category} in the scene.",
    "There is the {category} in the scene.",
    "a photo of {article} {category} in the scene.",
    "a photo of the {category} in the scene.",
    "a photo of one {category} in the scene.",
    "itap of {article} {category}.",
    "itap of my {category}.",
    "itap of the {category}.",
    "a photo of {article} {category}.",
    "a photo of my {category}.",
    "a photo of the {category}.",
    "a photo of one {category}.",
    "a photo of many {category}.",
    "a good photo of {article} {category}.",
    "a good photo of the {category}.",
    "a bad photo of {article} {category}.",
    "a bad photo of the {category}.",
    "a photo of a nice {category}.",
    "a photo of the nice {category}.",
    "a photo of a cool {category}.",
    "a photo of the cool {category}.",
    "a photo of a weird {category}.",
    "a photo of the weird {category}.",
    "a photo of a small {category}.",
    "a photo of the small {category}.",
    "a photo of a large {category}.",
    "a photo of the large {category}.",
    "a photo of a clean {category}.",
    "a photo of the clean {category}.",
    "a photo of a dirty {category}.",
    "a photo of the dirty {category}.",
    "a bright photo of {article} {category}.",
    "a bright photo of the {category}.",
    "a dark photo of {article} {category}.",
    "a dark photo of the {category}.",
    "a photo of a hard to see {category}.",
    "a photo of the hard to see {category}.",
    "a low resolution photo of {article} {category}.",
    "a low resolution photo of the {category}.",
    "a cropped photo of {article} {category}.",
    "a cropped photo of the {category}.",
    "a close-up photo of {article} {category}.",
    "a close-up photo of the {category}.",
    "a jpeg corrupted photo of {article} {category}.",
    "a jpeg corrupted photo of the {category}.",
    "a blurry photo of {article} {category}.",
    "a blurry photo of the {category}.",
    "a pixelated photo of {article} {category}.",
    "a pixelated photo of the {category}.",
    "a black and white photo of the {category}.",
    "a black and white photo of {article} {category}.",
    "a plastic {category}.",
    "the plastic {category}.",
    "a toy {category}.",
    "the toy {category}.",
    "a plushie {category}.",
    "the plushie {category}.",
    "a cartoon {category}.",
    "the cartoon {category}.",
    "an embroidered {category}.",
    "the embroidered {category}.",
    "a painting of the {category}.",
    "a painting of a {category}.",
};

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

std::span<const std::string_view> prompt_templates() { return kTemplates; }

std::string_view indefinite_article(std::string_view word) {
  if (word.empty()) return "a";
  switch (std::tolower(static_cast<unsigned char>(word.front()))) {
    case 'a':
    case 'e':
    case 'i':
    case 'o':
    case 'u':
      return "an";
    default:
      return "a";
  }
}

std::string fill_template(std::string_view tmpl, std::string_view category) {
  std::string out(tmpl);
  replace_all(out, "{article}", indefinite_article(category));
  replace_all(out, "{category}", category);
  return out;
}

std::vector<std::string> render_prompts(std::string_view category_name,
                                        std::span<const std::string> synonyms) {
  std::vector<std::string> out;
  out.reserve(kTemplates.size() * (1 + synonyms.size()));
  auto emit = [&](std::string_view name) {
    for (auto tmpl : kTemplates) out.push_back(fill_template(tmpl, name));
  };
  emit(category_name);
  for (const auto& s : synonyms) emit(s);
  return out;
}

}  // namespace vild
