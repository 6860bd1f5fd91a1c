#include <doctest.h>

#include <arpa/inet.h>
#include <httplib.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <csignal>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "lnl/review.hpp"
#include "test_support.hpp"

using namespace lnl;
using namespace lnl::review;
using lnl::testing::TempDir;
using nlohmann::json;

namespace {

const std::vector<std::string> kSets{"expert_reference", "deep_learning_model"};

class LiveServer {
 public:
  LiveServer(ReviewService& svc) : server_(svc) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  ReviewServer server_;
  int port_ = 0;
  std::thread thread_;
};

std::string rating_body(const std::string& key, const std::string& token, int level, double score) {
  return json{{"rater", key}, {"token", token}, {"level", level}, {"score", score}, {"time_on_case_s", 3.5}}.dump();
}

// A reparented child can linger as a zombie, so look at its state rather than kill(pid, 0).
bool running(int pid) {
  std::ifstream stat("/proc/" + std::to_string(pid) + "/stat");
  std::string pid_s, comm, state;
  if (!(stat >> pid_s >> comm >> state)) return false;
  return state != "Z" && state != "X";
}

int free_port() {
  const int fd = socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t len = sizeof addr;
  int port = -1;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0 &&
      getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0) {
    port = ntohs(addr.sin_port);
  }
  close(fd);
  return port;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("rating round trip over HTTP") {
  TempDir dir;
  const auto s = default_schema();
  const auto cases = lnl::testing::make_study(dir.path(), 2, kSets, s);
  const auto plan = create_plan(cases, kSets, default_rater_ids(2), 11, s, dir.path());
  ReviewService svc(plan, s, dir / "ratings.jsonl", dir.path());
  LiveServer live(svc);
  auto cli = live.client();

  const auto palette = cli.Get("/palette");
  REQUIRE(palette);
  CHECK(palette->status == 200);
  CHECK(json::parse(palette->body)["levels"].size() == 20);

  for (const auto& rater : plan.raters) {
    for (std::size_t a = 0; a < plan.assignments_per_rater(); ++a) {
      const auto res = cli.Get("/session/" + rater.session_key + "/next");
      REQUIRE(res);
      REQUIRE(res->status == 200);
      const auto next = json::parse(res->body);
      CHECK(next["complete"] == false);
      CHECK(next["position"] == a + 1);
      const std::string token = next["token"];
      CHECK(token == rater.sequence[a].token);

      const auto png = cli.Get("/render?token=" + token + "&plane=coronal&index=20&wc=40&ww=400");
      REQUIRE(png);
      CHECK(png->status == 200);
      CHECK(png->get_header_value("Content-Type") == "image/png");
      const auto raster = lnl::testing::decode_png(png->body);
      CHECK(raster.width == 48);
      CHECK(raster.height == 72);

      for (const auto& lv : next["levels"]) {
        const auto post = cli.Post("/rating", rating_body(rater.session_key, token, lv["id"], 70), "application/json");
        REQUIRE(post);
        CHECK(post->status == 200);
      }
    }
    const auto done = json::parse(cli.Get("/session/" + rater.session_key + "/next")->body);
    CHECK(done["complete"] == true);
    const auto prog = json::parse(cli.Get("/progress/" + rater.session_key)->body);
    CHECK(prog["ratings_done"] == plan.assignments_per_rater() * 20);
  }

  httplib::Headers auth{{"Authorization", "Bearer " + plan.admin_key}};
  const auto exp = cli.Get("/export?unblind=1", auth);
  REQUIRE(exp);
  CHECK(exp->status == 200);
  CHECK(count_lines(exp->body) == 1 + plan.expected_ratings());
  CHECK(exp->body.find("expert_reference") != std::string::npos);
  const auto blind = cli.Get("/export?unblind=0", auth);
  CHECK(blind->body.find("expert_reference") == std::string::npos);
}

TEST_CASE("HTTP errors map to status codes") {
  TempDir dir;
  const auto s = default_schema();
  const auto cases = lnl::testing::make_study(dir.path(), 1, kSets, s);
  const auto plan = create_plan(cases, kSets, default_rater_ids(2), 2, s, dir.path());
  ReviewService svc(plan, s, dir / "ratings.jsonl", dir.path());
  LiveServer live(svc);
  auto cli = live.client();
  const auto& r1 = plan.raters[0];
  const auto& r2 = plan.raters[1];
  const auto& tok = r1.sequence[0].token;

  CHECK(cli.Get("/session/deadbeef/next")->status == 404);
  CHECK(cli.Get("/progress/deadbeef")->status == 404);
  CHECK(cli.Get("/render?token=nope&plane=axial&index=0")->status == 404);
  CHECK(cli.Get("/render?token=" + tok + "&plane=oblique&index=0")->status == 400);
  CHECK(cli.Get("/render?token=" + tok + "&plane=axial&index=999")->status == 400);
  CHECK(cli.Get("/render?token=" + tok + "&plane=axial")->status == 400);

  auto post = [&](const std::string& body) { return cli.Post("/rating", body, "application/json")->status; };
  CHECK(post("{not json") == 400);
  CHECK(post(R"({"token": "x"})") == 400);
  CHECK(post(rating_body(r1.session_key, tok, 1, 100.5)) == 400);
  CHECK(post(rating_body(r1.session_key, tok, 99, 50)) == 400);
  CHECK(post(rating_body(r2.session_key, tok, 1, 50)) == 404);
  CHECK(post(rating_body("bogus", tok, 1, 50)) == 404);
  CHECK(post(rating_body(r1.session_key, tok, 1, 50)) == 200);
  CHECK(svc.history().size() == 1);

  CHECK(cli.Get("/export")->status == 401);
  CHECK(cli.Get("/export", {{"Authorization", "Bearer " + r1.session_key}})->status == 401);
  CHECK(cli.Get("/export", {{"Authorization", "Bearer " + plan.admin_key}})->status == 200);
}

TEST_CASE("the lnl serve command answers requests and shuts down on SIGTERM") {
  TempDir dir;
  const auto s = default_schema();
  const auto cases = lnl::testing::make_study(dir.path(), 1, kSets, s);
  const auto plan = create_plan(cases, kSets, default_rater_ids(1), 4, s, dir.path());
  plan.save(dir / "plan.json");

  // Let the kernel choose a free port, then hand it to the child.
  const int port = free_port();
  REQUIRE(port > 0);
  const std::string log = (dir / "serve.log").string();
  const std::string cmd = "'" + std::string(LNL_CLI_PATH) + "' serve --plan '" + (dir / "plan.json").string() +
                          "' --port " + std::to_string(port) + " --data-root '" + dir.path().string() + "' > '" +
                          log + "' 2>&1 & echo $!";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  int pid = 0;
  REQUIRE(std::fscanf(p, "%d", &pid) == 1);
  pclose(p);

  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(10, 0);
  httplib::Result res;
  for (int attempt = 0; attempt < 100 && !res; ++attempt) {
    res = cli.Get("/session/" + plan.raters[0].session_key + "/next");
    if (!res) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["token"] == plan.raters[0].sequence[0].token);
  const auto png = cli.Get("/render?token=" + plan.raters[0].sequence[0].token + "&plane=axial&index=0");
  CHECK(png->status == 200);

  kill(pid, SIGTERM);
  bool exited = false;
  for (int attempt = 0; attempt < 100 && !exited; ++attempt) {
    exited = !running(pid);
    if (!exited) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  CHECK(exited);
}
