#include "geoflow/common.hpp"
// placeholder
