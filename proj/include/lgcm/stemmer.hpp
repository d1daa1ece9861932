#pragma once

#include <string>

namespace lgcm {

/// Classic Porter suffix-stripping stemmer (lowercase ASCII input).
std::string porter_stem(const std::string& word);

} // namespace lgcm
