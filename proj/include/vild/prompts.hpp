#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vild {

// The 63 detection prompt templates, with `{article}` and `{category}` placeholders.
std::span<const std::string_view> prompt_templates();

// "an" before a vowel letter, "a" otherwise.
std::string_view indefinite_article(std::string_view word);

std::string fill_template(std::string_view tmpl, std::string_view category);

// All 63 templates filled with the category name, then all 63 with each
// synonym in order. Size is 63 * (1 + synonyms.size()).
std::vector<std::string> render_prompts(std::string_view category_name,
                                        std::span<const std::string> synonyms);

}  // namespace vild
