#pragma once

#include "lpicp/core.hpp"
#include "lpicp/spatial_index.hpp"
#include "lpicp/features.hpp"
#include "lpicp/residuals.hpp"
#include "lpicp/localizability.hpp"
#include "lpicp/optimizer.hpp"
#include "lpicp/scene.hpp"
#include "lpicp/trajectory.hpp"
#include "lpicp/io.hpp"
#include "lpicp/experiment.hpp"
#include "lpicp/report.hpp"
#include "lpicp/config.hpp"
