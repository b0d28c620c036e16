// Browser bootstrap: wires the chat state, profile store and node browser to
// the DOM. Kept thin; everything interesting lives in the testable modules.

import { ApiClient } from "./api.js";
import { ProfileStore } from "./profile.js";
import {
  renderError,
  renderNodePanel,
  renderPending,
  renderProfilePanel,
  renderTurns,
} from "./render.js";
import { ChatState } from "./state.js";
import type { UserProfile } from "./types.js";

const SERVICE_URL =
  new URLSearchParams(window.location.search).get("service") ??
  "http://127.0.0.1:8000";

const client = new ApiClient(SERVICE_URL);
const store = new ProfileStore(window.localStorage);
let profile: UserProfile = store.load();
const chat = new ChatState(client, () => profile);

const chatLog = document.getElementById("chat-log") as HTMLElement;
const statusLine = document.getElementById("status-line") as HTMLElement;
const form = document.getElementById("ask-form") as HTMLFormElement;
const input = document.getElementById("question-input") as HTMLInputElement;
const sendButton = document.getElementById("send-button") as HTMLButtonElement;
const profilePanel = document.getElementById("profile-panel") as HTMLElement;
const nodeForm = document.getElementById("node-form") as HTMLFormElement;
const nodeInput = document.getElementById("node-input") as HTMLInputElement;
const nodePanel = document.getElementById("node-panel") as HTMLElement;

function redrawChat(): void {
  chatLog.innerHTML = renderTurns(chat.turns);
  statusLine.innerHTML = renderError(chat.lastError);
  chatLog.scrollTop = chatLog.scrollHeight;
}

function setPending(question: string | null): void {
  input.disabled = question !== null;
  sendButton.disabled = question !== null;
  if (question !== null) {
    statusLine.innerHTML = renderPending(question);
  }
}

async function submitQuestion(question: string): Promise<void> {
  if (chat.pending) return;
  setPending(question);
  await chat.ask(question);
  setPending(null);
  redrawChat();
  if (chat.lastError === null) {
    input.value = "";
  }
  input.focus();
}

form.addEventListener("submit", (event) => {
  event.preventDefault();
  void submitQuestion(input.value);
});

statusLine.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  if (target.dataset["action"] === "retry" && chat.lastError) {
    void submitQuestion(chat.lastError.question);
  }
});

function redrawProfile(): void {
  profilePanel.innerHTML = renderProfilePanel(profile);
}

profilePanel.addEventListener("change", (event) => {
  const target = event.target as HTMLInputElement;
  const diet = target.dataset["diet"];
  const allergen = target.dataset["allergen"];
  if (diet !== undefined) {
    profile = {
      ...profile,
      diets: target.checked
        ? [...profile.diets, diet]
        : profile.diets.filter((d) => d !== diet),
    };
  } else if (allergen !== undefined) {
    const id = Number(allergen);
    profile = {
      ...profile,
      excludedAllergens: target.checked
        ? [...profile.excludedAllergens, id]
        : profile.excludedAllergens.filter((a) => a !== id),
    };
  }
  store.save(profile);
});

async function browseNode(id: string): Promise<void> {
  const trimmed = id.trim();
  if (!trimmed) return;
  try {
    const response = await client.node(trimmed);
    nodePanel.innerHTML = renderNodePanel(response, trimmed);
  } catch (err) {
    nodePanel.innerHTML = renderNodePanel(null, trimmed);
  }
}

nodeForm.addEventListener("submit", (event) => {
  event.preventDefault();
  void browseNode(nodeInput.value);
});

nodePanel.addEventListener("click", (event) => {
  const anchor = (event.target as HTMLElement).closest("a[data-node-id]");
  if (anchor instanceof HTMLAnchorElement) {
    event.preventDefault();
    const nodeId = anchor.dataset["nodeId"];
    if (nodeId) {
      nodeInput.value = nodeId;
      void browseNode(nodeId);
    }
  }
});

redrawProfile();
redrawChat();
void client.health().then((ok) => {
  if (!ok) {
    statusLine.innerHTML = renderError({
      question: "",
      message: `service at ${SERVICE_URL} is not reachable`,
    });
  }
});
