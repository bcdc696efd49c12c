#include <gtest/gtest.h>

#include <random>

#include "codewatch/service.hpp"
#include "oracles.hpp"

using namespace codewatch;

namespace {

class ServiceTest : public ::testing::Test {
 protected:
  ServiceTest() : repo_([this] { return now_; }), service_(repo_, config()) {}

  ServiceConfig config() {
    ServiceConfig c;
    c.clock = [this] { return now_; };
    c.token_lifetime_ms = 1000;
    c.fast_credential_hash = true;
    return c;
  }

  // Bootstraps an admin and returns its token.
  std::string bootstrap() {
    admin_ = service_.create_user(std::nullopt, "root", "root-pw", Permission::Admin);
    return service_.login("root", "root-pw").token;
  }

  std::pair<UserAccount, std::string> make_user(const std::string& admin_token, const std::string& name,
                                                Permission p) {
    auto account = service_.create_user(admin_token, name, name + "-pw", p);
    return {account, service_.login(name, name + "-pw").token};
  }

  SessionLog log_for(const std::string& user_id, EpochMs start = 1000) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(start));
    auto log = oracle::random_valid_log(rng, 4);
    log.user_id = user_id;
    const auto shift = start - log.events.front().time;
    for (auto& e : log.events) e.time += shift;
    return log;
  }

  static ErrorCode code_of(const std::function<void()>& f) {
    try {
      f();
    } catch (const ApiError& e) {
      return e.code();
    }
    ADD_FAILURE() << "no ApiError thrown";
    return ErrorCode::Internal;
  }

  EpochMs now_ = 0;
  MemoryRepository repo_;
  IngestionService service_;
  UserAccount admin_;
};

}  // namespace

TEST_F(ServiceTest, BootstrapOnlyWhenEmpty) {
  EXPECT_EQ(service_.user_count(), 0u);
  const auto admin = bootstrap();
  EXPECT_EQ(service_.user_count(), 1u);
  EXPECT_EQ(code_of([&] { service_.create_user(std::nullopt, "x", "pw", Permission::Subject); }),
            ErrorCode::Unauthorized);
  EXPECT_EQ(code_of([&] { service_.create_user(admin, "root", "pw", Permission::Subject); }), ErrorCode::Conflict);
}

TEST_F(ServiceTest, CredentialsAreHashed) {
  bootstrap();
  const auto docs = repo_.query(Collection::User, {});
  ASSERT_EQ(docs.size(), 1u);
  const auto hash = docs[0].body["credential_hash"].get<std::string>();
  EXPECT_EQ(hash.find("root-pw"), std::string::npos);
  EXPECT_TRUE(verify_credential("root-pw", hash));
  EXPECT_FALSE(verify_credential("root-pw2", hash));
}

TEST_F(ServiceTest, LoginFailures) {
  bootstrap();
  EXPECT_EQ(code_of([&] { service_.login("root", "wrong"); }), ErrorCode::Unauthorized);
  EXPECT_EQ(code_of([&] { service_.login("nobody", "root-pw"); }), ErrorCode::Unauthorized);
}

TEST_F(ServiceTest, TokenExpiry) {
  const auto token = bootstrap();
  now_ = 999;
  EXPECT_NO_THROW(service_.authenticate(token));
  now_ = 1000;
  EXPECT_EQ(code_of([&] { service_.authenticate(token); }), ErrorCode::Unauthorized);
  EXPECT_EQ(code_of([&] { service_.authenticate("not-a-token"); }), ErrorCode::Unauthorized);
}

TEST_F(ServiceTest, PermissionMatrix) {
  const auto admin = bootstrap();
  auto [subject, subject_token] = make_user(admin, "sam", Permission::Subject);
  auto [analyst, analyst_token] = make_user(admin, "ana", Permission::Analyst);
  auto [other, other_token] = make_user(admin, "oli", Permission::Subject);
  service_.register_log(other_token, log_for(other.user_id));

  struct Caller {
    const char* name;
    std::string token;
    std::string user_id;
    Permission level;
  };
  const std::vector<Caller> callers = {{"subject", subject_token, subject.user_id, Permission::Subject},
                                       {"analyst", analyst_token, analyst.user_id, Permission::Analyst},
                                       {"admin", admin, admin_.user_id, Permission::Admin}};
  int n = 0;
  for (const auto& c : callers) {
    const bool is_admin = c.level == Permission::Admin;
    const auto expect = [&](bool allowed, const std::function<void()>& f, const char* op) {
      if (allowed) {
        EXPECT_NO_THROW(f()) << c.name << " " << op;
      } else {
        EXPECT_EQ(code_of(f), ErrorCode::Forbidden) << c.name << " " << op;
      }
    };
    expect(is_admin, [&] { service_.create_user(c.token, "new" + std::to_string(n++), "pw", Permission::Subject); },
           "create_user");
    expect(true, [&] { service_.register_log(c.token, log_for(c.user_id)); }, "register own");
    expect(is_admin, [&] { service_.register_log(c.token, log_for(other.user_id)); }, "register other");
    expect(true, [&] { service_.query_logs(c.token, QueryFilter{c.user_id, {}, {}, {}}); }, "query own");
    expect(c.level != Permission::Subject, [&] { service_.query_logs(c.token, QueryFilter{}); }, "query all");
    expect(c.level != Permission::Subject,
           [&] { service_.query_logs(c.token, QueryFilter{other.user_id, {}, {}, {}}); }, "query other");
    expect(is_admin, [&] { service_.set_permission(c.token, other.user_id, Permission::Subject); }, "set_permission");
  }
}

TEST_F(ServiceTest, RegisterValidatesAndStoresExtraFields) {
  const auto admin = bootstrap();
  auto [sam, token] = make_user(admin, "sam", Permission::Subject);
  auto bad = log_for(sam.user_id);
  bad.events.pop_back();
  try {
    service_.register_log(token, bad);
    FAIL();
  } catch (const ApiError& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationFailed);
    EXPECT_EQ(e.violations(), std::vector<std::string>{"last event must be End"});
  }
  EXPECT_EQ(code_of([&] { service_.register_log_document(token, "{"); }), ErrorCode::Malformed);

  auto doc = log_to_json(log_for(sam.user_id));
  doc["plugin"] = "vscode";
  const auto id = service_.register_log_document(token, doc.dump());
  const auto rec = service_.get_log(token, id);
  EXPECT_EQ(rec.document["plugin"], "vscode");
  EXPECT_EQ(rec.log.user_id, sam.user_id);
}

TEST_F(ServiceTest, QueryFiltersAndOrder) {
  const auto admin = bootstrap();
  auto [sam, token] = make_user(admin, "sam", Permission::Subject);
  service_.register_log(token, log_for(sam.user_id, 3000));
  service_.register_log(token, log_for(sam.user_id, 1000));
  service_.register_log(token, log_for(sam.user_id, 2000));
  const auto all = service_.query_logs(admin, {});
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].log.start_time(), 1000);
  EXPECT_EQ(all[2].log.start_time(), 3000);
  const auto window = service_.query_logs(admin, QueryFilter{{}, {}, 1000, 2000});
  EXPECT_EQ(window.size(), 2u);
  EXPECT_EQ(code_of([&] { service_.get_log(admin, "nope"); }), ErrorCode::NotFound);
}

TEST_F(ServiceTest, DeleteRevokesTokensAndRetainsLogs) {
  const auto admin = bootstrap();
  auto [sam, token] = make_user(admin, "sam", Permission::Subject);
  service_.register_log(token, log_for(sam.user_id));
  service_.delete_user(admin, sam.user_id);
  EXPECT_EQ(code_of([&] { service_.authenticate(token); }), ErrorCode::Unauthorized);
  EXPECT_EQ(service_.query_logs(admin, QueryFilter{sam.user_id, {}, {}, {}}).size(), 1u);
  EXPECT_EQ(code_of([&] { service_.delete_user(admin, sam.user_id); }), ErrorCode::NotFound);
}

TEST_F(ServiceTest, DeleteWithPurge) {
  const auto admin = bootstrap();
  auto [sam, token] = make_user(admin, "sam", Permission::Subject);
  service_.register_log(token, log_for(sam.user_id));
  service_.delete_user(admin, sam.user_id, true);
  EXPECT_TRUE(service_.query_logs(admin, QueryFilter{sam.user_id, {}, {}, {}}).empty());
}

TEST_F(ServiceTest, DemotionTakesEffectImmediately) {
  const auto admin = bootstrap();
  auto [ana, token] = make_user(admin, "ana", Permission::Analyst);
  EXPECT_NO_THROW(service_.query_logs(token, {}));
  const auto updated = service_.set_permission(admin, ana.user_id, Permission::Subject);
  EXPECT_EQ(updated.permission, Permission::Subject);
  EXPECT_EQ(code_of([&] { service_.query_logs(token, {}); }), ErrorCode::Forbidden);
}

TEST(ErrorCodes, StatusMapping) {
  EXPECT_EQ(http_status(ErrorCode::Malformed), 400);
  EXPECT_EQ(http_status(ErrorCode::ValidationFailed), 422);
  EXPECT_EQ(http_status(ErrorCode::Unauthorized), 401);
  EXPECT_EQ(http_status(ErrorCode::Forbidden), 403);
  EXPECT_EQ(http_status(ErrorCode::NotFound), 404);
  EXPECT_EQ(http_status(ErrorCode::Conflict), 409);
  EXPECT_EQ(http_status(ErrorCode::Internal), 500);
  const ApiError e(ErrorCode::ValidationFailed, "bad", {"v1"});
  const auto back = ApiError::from_json(e.to_json(), ErrorCode::Internal);
  EXPECT_EQ(back.code(), ErrorCode::ValidationFailed);
  EXPECT_EQ(back.violations(), e.violations());
}
