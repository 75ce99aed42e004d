#include "refinery/process.hpp"

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "refinery/code_model.hpp"

namespace fs = std::filesystem;

namespace refinery {

namespace {

void set_nonblock(int fd) {
    int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, const fs::path& cwd,
                          const std::string& stdin_bytes, std::optional<double> timeout_seconds) {
    if (argv.empty()) throw Error("run_process: empty argv");

    int in_pipe[2], out_pipe[2], err_pipe[2], status_pipe[2];
    if (pipe(in_pipe) || pipe(out_pipe) || pipe(err_pipe) || pipe(status_pipe)) {
        throw Error("run_process: pipe failed");
    }
    fcntl(status_pipe[1], F_SETFD, FD_CLOEXEC);

    pid_t pid = fork();
    if (pid < 0) throw Error("run_process: fork failed");
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        close(err_pipe[1]);
        close(status_pipe[0]);
        if (!cwd.empty() && chdir(cwd.c_str()) != 0) {
            int e = errno;
            (void)!write(status_pipe[1], &e, sizeof e);
            _exit(127);
        }
        std::vector<char*> args;
        args.reserve(argv.size() + 1);
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        execvp(args[0], args.data());
        int e = errno;
        (void)!write(status_pipe[1], &e, sizeof e);
        _exit(127);
    }

    close(in_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[1]);
    close(status_pipe[1]);

    // exec failure is reported through the CLOEXEC status pipe
    int exec_errno = 0;
    {
        ssize_t n = read(status_pipe[0], &exec_errno, sizeof exec_errno);
        if (n > 0) {
            close(status_pipe[0]);
            close(in_pipe[1]);
            close(out_pipe[0]);
            close(err_pipe[0]);
            waitpid(pid, nullptr, 0);
            throw EnvironmentError("cannot execute '" + argv[0] + "': " + std::strerror(exec_errno));
        }
    }
    close(status_pipe[0]);

    set_nonblock(in_pipe[1]);
    set_nonblock(out_pipe[0]);
    set_nonblock(err_pipe[0]);
    signal(SIGPIPE, SIG_IGN);

    ProcessResult result;
    std::size_t written = 0;
    bool stdin_open = true;
    if (stdin_bytes.empty()) {
        close(in_pipe[1]);
        stdin_open = false;
    }

    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(timeout_seconds.value_or(1e9)));

    bool out_open = true, err_open = true;
    char buf[16384];
    while (out_open || err_open || stdin_open) {
        if (timeout_seconds && std::chrono::steady_clock::now() >= deadline) {
            kill(pid, SIGKILL);
            result.timed_out = true;
            break;
        }
        pollfd fds[3];
        nfds_t nfds = 0;
        int out_idx = -1, err_idx = -1, in_idx = -1;
        if (out_open) {
            out_idx = static_cast<int>(nfds);
            fds[nfds++] = {out_pipe[0], POLLIN, 0};
        }
        if (err_open) {
            err_idx = static_cast<int>(nfds);
            fds[nfds++] = {err_pipe[0], POLLIN, 0};
        }
        if (stdin_open) {
            in_idx = static_cast<int>(nfds);
            fds[nfds++] = {in_pipe[1], POLLOUT, 0};
        }
        int remaining_ms = 200;
        poll(fds, nfds, remaining_ms);

        if (out_idx >= 0 && (fds[out_idx].revents & (POLLIN | POLLHUP))) {
            ssize_t n = read(out_pipe[0], buf, sizeof buf);
            if (n > 0) result.out.append(buf, static_cast<std::size_t>(n));
            else if (n == 0 || (n < 0 && errno != EAGAIN)) {
                close(out_pipe[0]);
                out_open = false;
            }
        }
        if (err_idx >= 0 && (fds[err_idx].revents & (POLLIN | POLLHUP))) {
            ssize_t n = read(err_pipe[0], buf, sizeof buf);
            if (n > 0) result.err.append(buf, static_cast<std::size_t>(n));
            else if (n == 0 || (n < 0 && errno != EAGAIN)) {
                close(err_pipe[0]);
                err_open = false;
            }
        }
        if (in_idx >= 0 && (fds[in_idx].revents & (POLLOUT | POLLERR | POLLHUP))) {
            if (fds[in_idx].revents & (POLLERR | POLLHUP)) {
                close(in_pipe[1]);
                stdin_open = false;
            } else {
                ssize_t n = write(in_pipe[1], stdin_bytes.data() + written, stdin_bytes.size() - written);
                if (n > 0) written += static_cast<std::size_t>(n);
                if (written >= stdin_bytes.size() || (n < 0 && errno != EAGAIN)) {
                    close(in_pipe[1]);
                    stdin_open = false;
                }
            }
        }
    }

    if (result.timed_out) {
        if (stdin_open) close(in_pipe[1]);
        if (out_open) close(out_pipe[0]);
        if (err_open) close(err_pipe[0]);
        waitpid(pid, nullptr, 0);
        result.exit_code = kTimeoutExit;
        return result;
    }

    // pipes are closed but the child may still be running; honor the deadline
    int status = 0;
    for (;;) {
        pid_t r = waitpid(pid, &status, timeout_seconds ? WNOHANG : 0);
        if (r == pid) break;
        if (r < 0) {
            result.exit_code = -1;
            return result;
        }
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(pid, SIGKILL);
            waitpid(pid, nullptr, 0);
            result.timed_out = true;
            result.exit_code = kTimeoutExit;
            return result;
        }
        usleep(5000);
    }
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) result.exit_code = 128 + WTERMSIG(status);
    else result.exit_code = -1;
    return result;
}

TempDir::TempDir(const std::string& tag) {
    keep_ = std::getenv("REFINERY_KEEP_WORKDIRS") != nullptr;
    auto base = fs::temp_directory_path() / (tag + ".XXXXXX");
    std::string tmpl = base.string();
    if (!mkdtemp(tmpl.data())) throw Error("mkdtemp failed for " + tmpl);
    path_ = tmpl;
}

TempDir::~TempDir() {
    if (keep_ || path_.empty()) return;
    std::error_code ec;
    fs::remove_all(path_, ec);
}

}  // namespace refinery
