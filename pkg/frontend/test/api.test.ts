import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { makeStubApi } from "./stub.js";

describe("ApiClient", () => {
  it("creates sessions and sends turns against the configured base url", async () => {
    const stub = makeStubApi();
    const seen: string[] = [];
    const client = new ApiClient("http://stub.test", async (input, init) => {
      seen.push(String(input));
      return stub.fetch(input, init);
    });
    const sid = await client.createSession();
    const response = await client.sendTurn(sid, "next");
    expect(response.screen.step_position).toEqual({ index: 1, total: 4 });
    expect(seen[0]).toBe("http://stub.test/v1/sessions");
    expect(seen[1]).toBe(`http://stub.test/v1/sessions/${sid}/turns`);
  });

  it("raises ApiError with the status code", async () => {
    const stub = makeStubApi();
    const client = new ApiClient("http://stub.test", stub.fetch);
    await expect(client.history("missing")).rejects.toMatchObject({
      name: "ApiError",
      status: 404,
    });
    try {
      await client.history("missing");
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
    }
  });
});
