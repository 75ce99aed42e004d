#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace refinery {

/// Exit value recorded when a process exceeds its timeout.
inline constexpr int kTimeoutExit = -124;

struct ProcessResult {
    int exit_code = 0;  // normal exit status; 128+signo when signalled; kTimeoutExit on timeout
    std::string out;
    std::string err;
    bool timed_out = false;
};

/// Runs argv[0] with the given arguments, working directory and stdin bytes.
/// Throws refinery::Error when the executable cannot be spawned at all
/// (distinct from the program failing); a timeout is a result, not an error.
ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::filesystem::path& cwd,
                          const std::string& stdin_bytes = {},
                          std::optional<double> timeout_seconds = {});

/// mkdtemp-backed scratch directory, removed on destruction unless the
/// REFINERY_KEEP_WORKDIRS environment variable is set.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "refinery");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    bool keep_ = false;
};

}  // namespace refinery
