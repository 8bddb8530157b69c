// Session machine against a scripted fake socket and fake clock: the
// full owner and guest handshakes, relay streaming with pacing, drop
// counting, and every error banner path.

import { describe, expect, it } from "vitest";

import {
  Doc,
  RELAY_PROTOCOL_VERSION,
  blobToBody,
  bodyToBlob,
  decodeNegotiation,
  encodeDoc,
  encodeNegotiation,
} from "../src/signaling.js";
import { Session, SessionStatus } from "../src/session.js";
import {
  FLAG_END_OF_STREAM,
  FRAME_SIZE,
  IDENTITY_POSE,
  LANDMARK_COUNT,
  decodeFrame,
  encodeFrame,
} from "../src/wire.js";

class FakeSocket {
  sentTexts: string[] = [];
  closed = false;

  send(text: string): void {
    this.sentTexts.push(text);
  }

  close(): void {
    this.closed = true;
  }

  sentDocs(): Doc[] {
    return this.sentTexts.map((text) => JSON.parse(text) as Doc);
  }

  lastDoc(): Doc {
    return this.sentDocs()[this.sentTexts.length - 1];
  }
}

interface Harness {
  socket: FakeSocket;
  session: Session;
  clock: { nowMs: number };
  statuses: SessionStatus[];
  banners: string[];
  roomIds: string[];
}

function makeSession(fpsCap = 30): Harness {
  const socket = new FakeSocket();
  const clock = { nowMs: 1000 };
  const statuses: SessionStatus[] = [];
  const banners: string[] = [];
  const roomIds: string[] = [];
  const session = new Session(
    socket,
    {
      onStatus: (status) => statuses.push(status),
      onBanner: (text) => banners.push(text),
      onRoomId: (roomId) => roomIds.push(roomId),
    },
    {
      fpsCap,
      now: () => clock.nowMs,
      randomBytes: (n) => new Uint8Array(n).fill(0xab),
    },
  );
  return { socket, session, clock, statuses, banners, roomIds };
}

function deliver(h: Harness, doc: Doc): void {
  h.session.handleText(encodeDoc(doc));
}

function someCoords(): Float64Array {
  const coords = new Float64Array(LANDMARK_COUNT * 3);
  for (let i = 0; i < coords.length; i++) coords[i] = (i % 17) / 16 - 0.5;
  return coords;
}

function relayDoc(sequence: number, flags = 0): Doc {
  const packet = encodeFrame(someCoords(), IDENTITY_POSE, sequence, 0, flags);
  return { type: "relay_frame", body: blobToBody(packet) };
}

describe("owner flow", () => {
  it("walks create -> waiting -> negotiating -> established and streams", () => {
    const h = makeSession();
    h.session.createRoom();
    expect(h.socket.sentDocs()[0]).toEqual({ type: "create_room" });
    expect(h.session.status).toBe("connecting");
    expect(h.session.canSend()).toBe(false);

    deliver(h, { type: "room_created", room: "90" });
    expect(h.session.status).toBe("waiting");
    expect(h.session.roomId).toBe("90");
    expect(h.roomIds).toEqual(["90"]);

    // still no sending: the peer has not joined
    expect(h.session.sendFrame(someCoords())).toBe(false);
    expect(h.socket.sentTexts.length).toBe(1);

    deliver(h, { type: "peer_joined", room: "90" });
    expect(h.session.status).toBe("negotiating");
    const offerDoc = h.socket.lastDoc();
    expect(offerDoc.type).toBe("offer");
    const offer = decodeNegotiation(bodyToBlob(String(offerDoc.body)));
    expect(offer.kind).toBe("offer");
    expect(offer.version).toBe(RELAY_PROTOCOL_VERSION);
    expect(offer.endpoints).toEqual([]);
    expect(offer.token).toBe("ab".repeat(16));

    // relay mode may stream as soon as the peer is there
    expect(h.session.canSend()).toBe(true);

    deliver(h, {
      type: "answer",
      body: blobToBody(
        encodeNegotiation({ kind: "answer", token: offer.token, endpoints: [], version: 2 }),
      ),
    });
    expect(h.socket.lastDoc()).toEqual({ type: "established" });
    expect(h.session.status).toBe("established");
    expect(h.statuses).toEqual(["connecting", "waiting", "negotiating", "established"]);

    expect(h.session.sendFrame(someCoords())).toBe(true);
    const frameDoc = h.socket.lastDoc();
    expect(frameDoc.type).toBe("relay_frame");
    const packet = bodyToBlob(String(frameDoc.body));
    expect(packet.length).toBe(FRAME_SIZE);
    expect(decodeFrame(packet).sequence).toBe(0);
  });

  it("hangs up on a token mismatch", () => {
    const h = makeSession();
    h.session.createRoom();
    deliver(h, { type: "room_created", room: "90" });
    deliver(h, { type: "peer_joined", room: "90" });
    deliver(h, {
      type: "answer",
      body: blobToBody(
        encodeNegotiation({ kind: "answer", token: "00".repeat(16), endpoints: [], version: 2 }),
      ),
    });
    expect(h.session.status).toBe("failed");
    expect(h.socket.lastDoc()).toEqual({ type: "hang_up" });
    expect(h.banners.some((b) => b.includes("token"))).toBe(true);
  });
});

describe("guest flow", () => {
  function joinUpToOffer(h: Harness, version = RELAY_PROTOCOL_VERSION): void {
    h.session.joinRoom("90");
    expect(h.socket.sentDocs()[0]).toEqual({ room: "90", type: "join_room" });
    deliver(h, { type: "peer_joined", room: "90" });
    expect(h.session.status).toBe("negotiating");
    deliver(h, {
      type: "offer",
      body: blobToBody(
        encodeNegotiation({ kind: "offer", token: "17".repeat(16), endpoints: [], version }),
      ),
    });
  }

  it("answers a relay offer echoing the token", () => {
    const h = makeSession();
    joinUpToOffer(h);
    const answerDoc = h.socket.lastDoc();
    expect(answerDoc.type).toBe("answer");
    const answer = decodeNegotiation(bodyToBlob(String(answerDoc.body)));
    expect(answer.kind).toBe("answer");
    expect(answer.token).toBe("17".repeat(16));
    expect(answer.version).toBe(RELAY_PROTOCOL_VERSION);

    deliver(h, { type: "established" });
    expect(h.session.status).toBe("established");
  });

  it("refuses a direct-transport offer (wrong protocol version)", () => {
    const h = makeSession();
    joinUpToOffer(h, 1);
    expect(h.session.status).toBe("failed");
    expect(h.socket.lastDoc()).toEqual({ type: "hang_up" });
    expect(h.banners.some((b) => b.includes("version"))).toBe(true);
  });

  it("counts received frames and measures the inbound rate", () => {
    const h = makeSession();
    joinUpToOffer(h);
    deliver(h, { type: "established" });

    const frames: number[] = [];
    // re-wire the frame callback after construction via remoteFrame
    for (let i = 0; i < 31; i++) {
      deliver(h, relayDoc(i));
      frames.push(h.session.remoteFrame?.sequence ?? -1);
      h.clock.nowMs += 33.3333;
    }
    const stats = h.session.stats();
    expect(stats.framesReceived).toBe(31);
    expect(stats.bytesReceived).toBe(31 * FRAME_SIZE);
    expect(frames[30]).toBe(30); // latest frame wins
    // 30 paced intervals at ~30 fps: close to the 85140 B/s budget
    expect(stats.inboundRate).not.toBeNull();
    expect(Math.abs((stats.inboundRate as number) - 85140)).toBeLessThan(85140 * 0.02);
  });

  it("increments the drop counter on undecodable frames and keeps going", () => {
    const h = makeSession();
    joinUpToOffer(h);
    deliver(h, { type: "established" });

    deliver(h, relayDoc(0));
    deliver(h, { type: "relay_frame", body: "not base64!!" });
    deliver(h, { type: "relay_frame", body: blobToBody(new Uint8Array(12)) });
    const garbled = encodeFrame(someCoords(), IDENTITY_POSE, 1, 0);
    garbled[0] = 0x00;
    deliver(h, { type: "relay_frame", body: blobToBody(garbled) });
    deliver(h, relayDoc(2));

    const stats = h.session.stats();
    expect(stats.framesReceived).toBe(2);
    expect(stats.framesDropped).toBe(3);
    expect(h.session.status).toBe("established");
    expect(h.session.remoteFrame?.sequence).toBe(2);
  });

  it("closes when the peer signals end of stream", () => {
    const h = makeSession();
    joinUpToOffer(h);
    deliver(h, { type: "established" });
    deliver(h, relayDoc(0, FLAG_END_OF_STREAM));
    expect(h.session.status).toBe("closed");
    expect(h.banners.some((b) => b.includes("ended"))).toBe(true);
    expect(h.socket.sentDocs().some((d) => d.type === "hang_up")).toBe(true);
  });
});

describe("pacing", () => {
  it("coalesces frames above the cap", () => {
    const h = makeSession(30);
    h.session.createRoom();
    deliver(h, { type: "room_created", room: "r" });
    deliver(h, { type: "peer_joined", room: "r" });
    const before = h.socket.sentTexts.length;

    expect(h.session.sendFrame(someCoords())).toBe(true);
    expect(h.session.sendFrame(someCoords())).toBe(false); // same instant
    h.clock.nowMs += 10;
    expect(h.session.sendFrame(someCoords())).toBe(false); // too soon
    h.clock.nowMs += 24;
    expect(h.session.sendFrame(someCoords())).toBe(true);
    expect(h.socket.sentTexts.length).toBe(before + 2);
    expect(h.session.stats().framesSent).toBe(2);
  });
});

describe("error banners", () => {
  function bannerCase(code: number, text: string, expectStatus: SessionStatus): void {
    it(`surfaces code ${code} as "${text}" and lands in ${expectStatus}`, () => {
      const h = makeSession();
      h.session.joinRoom("nope");
      deliver(h, { type: "peer_joined", room: "nope" }); // put machine mid-flight
      deliver(h, { type: "error", code, text });
      expect(h.banners.some((b) => b.includes(text))).toBe(true);
      expect(h.session.status).toBe(expectStatus);
    });
  }

  bannerCase(1, "room not found", "failed");
  bannerCase(2, "room full", "failed");
  bannerCase(3, "illegal state", "negotiating"); // banner only
  bannerCase(5, "peer gone", "closed");

  it("stops sending after a no-peer error without killing the session", () => {
    const h = makeSession();
    h.session.createRoom();
    deliver(h, { type: "room_created", room: "r" });
    deliver(h, { type: "peer_joined", room: "r" });
    expect(h.session.canSend()).toBe(true);
    deliver(h, { type: "error", code: 4, text: "no peer" });
    expect(h.session.canSend()).toBe(false);
    expect(h.session.status).toBe("negotiating");
    expect(h.banners.some((b) => b.includes("no peer"))).toBe(true);
  });
});

describe("hang up", () => {
  it("sends an end-of-stream frame before the hang_up document", () => {
    const h = makeSession();
    h.session.createRoom();
    deliver(h, { type: "room_created", room: "r" });
    deliver(h, { type: "peer_joined", room: "r" });
    h.session.sendFrame(someCoords());

    h.session.hangUp();
    const docs = h.socket.sentDocs();
    const last = docs[docs.length - 1];
    const beforeLast = docs[docs.length - 2];
    expect(last).toEqual({ type: "hang_up" });
    expect(beforeLast.type).toBe("relay_frame");
    const trailer = decodeFrame(bodyToBlob(String(beforeLast.body)));
    expect(trailer.endOfStream).toBe(true);
    expect(h.session.status).toBe("closed");

    // idempotent
    const count = h.socket.sentTexts.length;
    h.session.hangUp();
    expect(h.socket.sentTexts.length).toBe(count);
  });

  it("refuses double create/join", () => {
    const h = makeSession();
    h.session.createRoom();
    expect(() => h.session.createRoom()).toThrow();
    expect(() => h.session.joinRoom("x")).toThrow();
  });
});
