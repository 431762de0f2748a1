#pragma once

#include "latentbridge/core/config.hpp"
#include "latentbridge/core/errors.hpp"
#include "latentbridge/core/random.hpp"
#include "latentbridge/core/tensor.hpp"
#include "latentbridge/embedding/bank.hpp"
#include "latentbridge/embedding/toy_embedder.hpp"
#include "latentbridge/generator/generator.hpp"
#include "latentbridge/adapter/cvae.hpp"
#include "latentbridge/adapter/checkpoint.hpp"
#include "latentbridge/training/trainer.hpp"
#include "latentbridge/backends.hpp"
#include "latentbridge/prior/nonparam_prior.hpp"
#include "latentbridge/inference/pipeline.hpp"
#include "latentbridge/eval/metrics.hpp"
#include "latentbridge/eval/harness.hpp"
#include "latentbridge/io/captions.hpp"
#include "latentbridge/io/png.hpp"
#include "latentbridge/io/image_dir.hpp"
