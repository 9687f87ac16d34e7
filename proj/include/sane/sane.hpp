#pragma once

#include "sane/config.hpp"
#include "sane/denoiser.hpp"
#include "sane/digest.hpp"
#include "sane/errors.hpp"
#include "sane/evaluation.hpp"
#include "sane/guidance.hpp"
#include "sane/image.hpp"
#include "sane/latent.hpp"
#include "sane/llm.hpp"
#include "sane/noise.hpp"
#include "sane/pipeline.hpp"
#include "sane/prompts.hpp"
#include "sane/result.hpp"
#include "sane/specifier.hpp"
