#pragma once

#include "stylegate/checkpoint.hpp"
#include "stylegate/cli.hpp"
#include "stylegate/config.hpp"
#include "stylegate/datasets.hpp"
#include "stylegate/error.hpp"
#include "stylegate/evaluation.hpp"
#include "stylegate/gradcheck.hpp"
#include "stylegate/layers.hpp"
#include "stylegate/losses.hpp"
#include "stylegate/nets.hpp"
#include "stylegate/report.hpp"
#include "stylegate/rng.hpp"
#include "stylegate/tensor.hpp"
#include "stylegate/training.hpp"
