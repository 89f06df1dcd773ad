#pragma once

#include <string>

namespace mcast {

using NodeId   = std::string;
using LinkId   = std::string;
using GroupId  = std::string;
using ClientId = std::string;
using AssetId  = std::string;

} // namespace mcast
