// Browser bootstrap: wires the session, input mapping and renderers to the
// control panel in index.html. Served by `abi serve --http-port`.

import { PlaygroundSession } from "./client.js";
import { DistanceDial, PX_PER_METER, WalkClock, pointerToLateral, clickToFloorPoint } from "./input.js";
import {
  Chrome,
  FootGridRenderer,
  LayerStackRenderer,
  WalklineRenderer,
  buildRuler,
} from "./render.js";
import type { Technique } from "./protocol.js";
import { WebSocketTransport } from "./ws-transport.js";

type Renderer = { render(view: import("./client.js").SessionView): void };

function need<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function main(): void {
  const stage = need<HTMLDivElement>("stage");
  const chromeRoot = need<HTMLDivElement>("chrome");
  const form = need<HTMLFormElement>("controls");
  const chrome = new Chrome(chromeRoot);
  buildRuler(chromeRoot);

  const url = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
  const session = new PlaygroundSession(
    new WebSocketTransport(url, (detail) => {
      session.view.error = detail;
      chrome.render(session.view);
    }),
  );

  let renderer: Renderer | null = null;
  let renderingEnabled = true;
  session.subscribe((view) => {
    if (!renderingEnabled) return;
    if (renderer) renderer.render(view);
    chrome.render(view);
  });

  const clock = new WalkClock();
  const dial = new DistanceDial(0.375, 0.125, 0.625);
  let walkTimer: number | null = null;
  let lateral = 0;

  function stopWalking(): void {
    if (walkTimer !== null) {
      clearInterval(walkTimer);
      walkTimer = null;
    }
    clock.reset();
  }

  function apply(): void {
    stopWalking();
    const technique = (need<HTMLSelectElement>("technique")).value as Technique;
    stage.textContent = "";
    if (technique === "walkline") {
      const nLanes = Number(need<HTMLInputElement>("lanes").value);
      const selectionTime = Number(need<HTMLInputElement>("selection-time").value);
      const target = Number(need<HTMLInputElement>("target").value);
      session.configure("walkline", {
        n_lanes: nLanes,
        selection_time: selectionTime,
        target,
      });
      renderer = new WalklineRenderer(stage, nLanes, target);
      lateral = 0;
      walkTimer = setInterval(() => {
        if (session.view.selected || !session.view.connected) {
          stopWalking();
          return;
        }
        const sample = clock.sample(performance.now(), lateral);
        session.sendWalkSample(sample.t, sample.x, sample.y);
      }, 1000 / 30) as unknown as number;
    } else if (technique === "foottap") {
      const rows = Number(need<HTMLInputElement>("rows").value);
      const cols = Number(need<HTMLInputElement>("cols").value);
      const indirect = need<HTMLInputElement>("indirect").checked;
      session.configure("foottap", { rows, cols });
      renderer = new FootGridRenderer(stage, rows, cols, 0.085, 0.15, indirect);
    } else {
      const nLayers = Number(need<HTMLInputElement>("layers").value);
      session.configure("proximity", { n_layers: nLayers });
      renderer = new LayerStackRenderer(stage, nLayers);
      session.sendDistance(0, dial.distance);
    }
  }

  stage.addEventListener("pointermove", (event) => {
    const rect = stage.getBoundingClientRect();
    lateral = pointerToLateral(event.clientX, rect.left + rect.width / 2);
  });
  stage.addEventListener("click", (event) => {
    if (session.view.technique !== "foottap") return;
    const rect = stage.getBoundingClientRect();
    const point = clickToFloorPoint(
      event.clientX,
      event.clientY,
      rect.left + rect.width / 2,
      rect.bottom,
    );
    session.sendTap(point.x, point.y);
  });
  stage.addEventListener("wheel", (event) => {
    if (session.view.technique !== "proximity") return;
    event.preventDefault();
    session.sendDistance(performance.now() / 1000, dial.wheel(event.deltaY));
  });
  need<HTMLInputElement>("rendering").addEventListener("change", (event) => {
    renderingEnabled = (event.target as HTMLInputElement).checked;
  });
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    apply();
  });

  apply();
}

main();
