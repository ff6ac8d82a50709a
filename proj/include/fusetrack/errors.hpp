#ifndef FUSETRACK_ERRORS_HPP
#define FUSETRACK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fusetrack {

/// Bad user input: unreadable files, malformed lines, invalid configuration.
/// The CLI maps this to exit code 1; anything else non-zero maps to 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fusetrack

#endif
