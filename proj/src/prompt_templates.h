// Evaluator prompt templates, embedded from prompts/gta-eval/*.txt.

#pragma once

namespace gapdx::prompts {

extern const char* const kSystemV1;
extern const char* const kUserV1;  // placeholders: {{instruction}} {{history}} {{cot}}
extern const char* const kFormatReminderV1;

}  // namespace gapdx::prompts
